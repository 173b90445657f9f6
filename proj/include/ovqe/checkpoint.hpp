#pragma once

#include "ovqe/net.hpp"

#include <filesystem>

namespace ovqe {

// Binary weight container: magic, format version, architecture block
// (channels, temporal_radius, rounds, ofae_blocks, offset_groups), then one
// record per parameter (name length, name, rank, dims, float32 payload).
// All integers and floats are little-endian.

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ParamStore<T>& params);

// Reads the architecture block only (cheap config sniffing).
ModelConfig peek_checkpoint_config(const std::filesystem::path& path);

// Loads weights into an existing net. The file's architecture block must
// match the net's config, and every record must land on a registered
// parameter of identical shape (full shape audit; extra, missing, or
// reshaped records are rejected).
template <typename T>
void load_checkpoint(const std::filesystem::path& path, Net<T>& net);

} // namespace ovqe
