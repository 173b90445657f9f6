#include "ovqe/frame.hpp"

#include <string>

namespace ovqe {

void Plane::validate() const {
    if (width <= 0 || height <= 0)
        throw ArgumentError("plane: non-positive dimensions " + std::to_string(width) + "x" +
                            std::to_string(height));
    if (bit_depth != 8 && bit_depth != 10)
        throw ArgumentError("plane: unsupported bit depth " + std::to_string(bit_depth));
    if (samples.size() != sample_count())
        throw ArgumentError("plane: sample buffer holds " + std::to_string(samples.size()) +
                            " values, expected " + std::to_string(sample_count()));
    const uint16_t max = static_cast<uint16_t>(max_value());
    for (uint16_t s : samples)
        if (s > max)
            throw ArgumentError("plane: sample value " + std::to_string(s) + " exceeds " +
                                std::to_string(max));
}

void VideoFrame::validate() const {
    y.validate();
    u.validate();
    v.validate();
    if (index < 0) throw ArgumentError("frame: negative index");
    if (y.width % 2 != 0 || y.height % 2 != 0)
        throw ArgumentError("frame: odd luma dimensions " + std::to_string(y.width) + "x" +
                            std::to_string(y.height) + " break 4:2:0 subsampling");
    if (u.width != y.width / 2 || u.height != y.height / 2 || v.width != y.width / 2 ||
        v.height != y.height / 2)
        throw ArgumentError("frame: chroma planes are not half the luma size");
    if (u.bit_depth != y.bit_depth || v.bit_depth != y.bit_depth)
        throw ArgumentError("frame: mixed bit depths across planes");
}

void Sequence::validate() const {
    if (width <= 0 || height <= 0) throw ArgumentError("sequence: non-positive dimensions");
    for (size_t i = 0; i < frames.size(); ++i) {
        const VideoFrame& f = frames[i];
        f.validate();
        if (f.y.width != width || f.y.height != height)
            throw ArgumentError("sequence: frame " + std::to_string(i) + " geometry mismatch");
        if (f.y.bit_depth != bit_depth)
            throw ArgumentError("sequence: frame " + std::to_string(i) + " bit depth mismatch");
        if (f.index != static_cast<int>(i))
            throw ArgumentError("sequence: frame indices not contiguous at " + std::to_string(i));
    }
}

Plane extract_luma(const VideoFrame& frame) {
    return frame.y;
}

} // namespace ovqe
