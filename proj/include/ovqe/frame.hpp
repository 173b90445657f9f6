#pragma once

#include <cstdint>
#include <vector>

#include "ovqe/errors.hpp"

namespace ovqe {

// One sample plane of a picture, row-major. Samples are stored as 16-bit
// words so 8- and 10-bit content share one representation.
struct Plane {
    int width = 0;
    int height = 0;
    int bit_depth = 8;
    std::vector<uint16_t> samples;

    Plane() = default;
    Plane(int w, int h, int depth, uint16_t fill = 0)
        : width(w), height(h), bit_depth(depth),
          samples(static_cast<size_t>(w) * h, fill) {}

    uint16_t at(int row, int col) const { return samples[static_cast<size_t>(row) * width + col]; }
    uint16_t& at(int row, int col) { return samples[static_cast<size_t>(row) * width + col]; }

    int max_value() const { return (1 << bit_depth) - 1; }
    size_t sample_count() const { return static_cast<size_t>(width) * height; }

    // Enforces the sample-count and sample-range invariants.
    void validate() const;
};

// A decoded picture in 4:2:0 layout: full-resolution luma, half-resolution
// chroma in both dimensions.
struct VideoFrame {
    Plane y;
    Plane u;
    Plane v;
    int index = 0;

    void validate() const;
};

struct Sequence {
    std::vector<VideoFrame> frames;
    int width = 0;
    int height = 0;
    int bit_depth = 8;
    double frame_rate = 30.0;

    size_t frame_count() const { return frames.size(); }
    bool empty() const { return frames.empty(); }
    void validate() const;
};

// Returns a copy of the frame's Y plane (value semantics: mutating the
// result never touches the frame).
Plane extract_luma(const VideoFrame& frame);

} // namespace ovqe
