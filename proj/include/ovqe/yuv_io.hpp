#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "ovqe/frame.hpp"

namespace ovqe {

// Byte size of one I420 frame at the given geometry (1 byte per sample for
// 8-bit content, 2 little-endian bytes for 10-bit).
size_t yuv420_frame_bytes(int width, int height, int bit_depth);

// Reads a headerless planar YUV 4:2:0 file. The file size must be an exact
// multiple of one frame's byte size; at most max_frames frames are returned
// when the limit is set.
Sequence read_yuv420(const std::filesystem::path& path, int width, int height,
                     int bit_depth, std::optional<size_t> max_frames = std::nullopt,
                     double frame_rate = 30.0);

// Writes frames back-to-back in planar I420 order (Y, then U, then V).
void write_yuv420(const Sequence& seq, const std::filesystem::path& path);

} // namespace ovqe
