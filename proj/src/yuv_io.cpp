#include "ovqe/yuv_io.hpp"

#include <fstream>
#include <string>

namespace ovqe {

namespace {

int bytes_per_sample(int bit_depth) {
    if (bit_depth == 8) return 1;
    if (bit_depth == 10) return 2;
    throw ArgumentError("yuv: unsupported bit depth " + std::to_string(bit_depth));
}

void read_plane(std::istream& in, Plane& plane) {
    const int bps = bytes_per_sample(plane.bit_depth);
    const size_t n = plane.sample_count();
    if (bps == 1) {
        std::vector<uint8_t> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
        for (size_t i = 0; i < n; ++i) plane.samples[i] = raw[i];
    } else {
        std::vector<uint8_t> raw(n * 2);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 2));
        const uint16_t max = static_cast<uint16_t>(plane.max_value());
        for (size_t i = 0; i < n; ++i) {
            const uint16_t v = static_cast<uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
            if (v > max)
                throw FormatError("yuv: 10-bit sample value " + std::to_string(v) +
                                  " exceeds 1023");
            plane.samples[i] = v;
        }
    }
    if (!in) throw IoError("yuv: short read inside a frame");
}

void write_plane(std::ostream& out, const Plane& plane) {
    const int bps = bytes_per_sample(plane.bit_depth);
    const size_t n = plane.sample_count();
    if (bps == 1) {
        std::vector<uint8_t> raw(n);
        for (size_t i = 0; i < n; ++i) raw[i] = static_cast<uint8_t>(plane.samples[i]);
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(n));
    } else {
        std::vector<uint8_t> raw(n * 2);
        for (size_t i = 0; i < n; ++i) {
            raw[2 * i] = static_cast<uint8_t>(plane.samples[i] & 0xff);
            raw[2 * i + 1] = static_cast<uint8_t>(plane.samples[i] >> 8);
        }
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(n * 2));
    }
}

} // namespace

size_t yuv420_frame_bytes(int width, int height, int bit_depth) {
    const size_t luma = static_cast<size_t>(width) * height;
    return (luma + luma / 2) * static_cast<size_t>(bytes_per_sample(bit_depth));
}

Sequence read_yuv420(const std::filesystem::path& path, int width, int height, int bit_depth,
                     std::optional<size_t> max_frames, double frame_rate) {
    if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0)
        throw ArgumentError("yuv: dimensions " + std::to_string(width) + "x" +
                            std::to_string(height) + " must be positive and even");
    bytes_per_sample(bit_depth);

    std::error_code ec;
    const auto file_size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("yuv: cannot stat '" + path.string() + "': " + ec.message());

    const size_t frame_bytes = yuv420_frame_bytes(width, height, bit_depth);
    if (file_size % frame_bytes != 0)
        throw FormatError("yuv: '" + path.string() + "' is " + std::to_string(file_size) +
                          " bytes, not a multiple of the " + std::to_string(frame_bytes) +
                          "-byte frame size (" + std::to_string(file_size % frame_bytes) +
                          " trailing bytes)");
    size_t frames_in_file = file_size / frame_bytes;
    if (frames_in_file == 0) throw FormatError("yuv: '" + path.string() + "' holds no frames");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("yuv: cannot open '" + path.string() + "' for reading");

    size_t count = frames_in_file;
    if (max_frames && *max_frames < count) count = *max_frames;

    Sequence seq;
    seq.width = width;
    seq.height = height;
    seq.bit_depth = bit_depth;
    seq.frame_rate = frame_rate;
    seq.frames.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        VideoFrame frame;
        frame.index = static_cast<int>(i);
        frame.y = Plane(width, height, bit_depth);
        frame.u = Plane(width / 2, height / 2, bit_depth);
        frame.v = Plane(width / 2, height / 2, bit_depth);
        read_plane(in, frame.y);
        read_plane(in, frame.u);
        read_plane(in, frame.v);
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

void write_yuv420(const Sequence& seq, const std::filesystem::path& path) {
    if (seq.empty()) throw ArgumentError("yuv: refusing to write an empty sequence");
    seq.validate();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("yuv: cannot open '" + path.string() + "' for writing");
    for (const VideoFrame& frame : seq.frames) {
        write_plane(out, frame.y);
        write_plane(out, frame.u);
        write_plane(out, frame.v);
    }
    out.flush();
    if (!out) throw IoError("yuv: write to '" + path.string() + "' failed");
}

} // namespace ovqe
