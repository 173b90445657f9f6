#pragma once

#include "ovqe/codec.hpp"
#include "ovqe/net.hpp"
#include "ovqe/training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ovqe {

enum class Verb { Enhance, Train, Evaluate, Bdrate };

const char* verb_name(Verb v);

struct SequenceConfig {
    std::filesystem::path path;
    int width = 0;
    int height = 0;
    int bit_depth = 8;
    double frame_rate = 30.0;
    size_t frame_count = 0; // 0 = read the whole file
};

// One flat, sectioned key=value config file drives every verb. Unknown
// sections or keys are rejected so typos fail loudly.
struct RunConfig {
    SequenceConfig sequence;
    CodecSpec codec;
    std::vector<int> qps{32, 37, 42, 47}; // bdrate sweep list
    ModelConfig model;
    TrainConfig train;
    std::filesystem::path weights;
    std::filesystem::path reference;
    std::filesystem::path out_dir = "out";
};

RunConfig parse_run_config(const std::filesystem::path& path);

// Fail-fast validation of everything the verb will need, before any input
// is read or output created.
void validate_for(const RunConfig& cfg, Verb verb);

} // namespace ovqe
