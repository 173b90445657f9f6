#include "ovqe/runconfig.hpp"

#include "ovqe/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace ovqe {
namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
    throw FormatError("config: key '" + key + "' has value '" + value + "', expected " +
                      expected);
}

long long parse_int(const std::string& key, const std::string& value) {
    size_t pos = 0;
    long long out = 0;
    try {
        out = std::stoll(value, &pos);
    } catch (const std::exception&) {
        bad_value(key, value, "an integer");
    }
    if (pos != value.size()) bad_value(key, value, "an integer");
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &pos);
    } catch (const std::exception&) {
        bad_value(key, value, "a number");
    }
    if (pos != value.size()) bad_value(key, value, "a number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "true/false");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) bad_value(key, value, "a comma-separated integer list");
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty()) bad_value(key, value, "a comma-separated integer list");
    return out;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ArgumentError("config: " + message);
}

} // namespace

const char* verb_name(Verb v) {
    switch (v) {
        case Verb::Enhance: return "enhance";
        case Verb::Train: return "train";
        case Verb::Evaluate: return "evaluate";
        case Verb::Bdrate: return "bdrate";
    }
    return "?";
}

RunConfig parse_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path.string() + "'");

    RunConfig cfg;
    std::string section;
    std::string line;
    int line_no = 0;
    std::set<std::string> seen;

    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw FormatError("config: malformed section header at line " +
                                  std::to_string(line_no));
            section = trim(line.substr(1, line.size() - 2));
            if (section != "sequence" && section != "codec" && section != "model" &&
                section != "train" && section != "paths")
                throw FormatError("config: unknown section '" + section + "' at line " +
                                  std::to_string(line_no));
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config: expected key=value at line " + std::to_string(line_no));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw FormatError("config: empty key at line " + std::to_string(line_no));
        if (section.empty())
            throw FormatError("config: key '" + key + "' appears before any [section]");

        const std::string qualified = section + "." + key;
        if (!seen.insert(qualified).second)
            throw FormatError("config: duplicate key '" + qualified + "'");

        if (section == "sequence") {
            if (key == "path") cfg.sequence.path = value;
            else if (key == "width") cfg.sequence.width = static_cast<int>(parse_int(qualified, value));
            else if (key == "height") cfg.sequence.height = static_cast<int>(parse_int(qualified, value));
            else if (key == "bit_depth") cfg.sequence.bit_depth = static_cast<int>(parse_int(qualified, value));
            else if (key == "frame_rate") cfg.sequence.frame_rate = parse_double(qualified, value);
            else if (key == "frame_count") cfg.sequence.frame_count = static_cast<size_t>(parse_int(qualified, value));
            else throw FormatError("config: unknown key '" + qualified + "'");
        } else if (section == "codec") {
            if (key == "kind") {
                if (value == "mock") cfg.codec.kind = CodecKind::Mock;
                else if (value == "external") cfg.codec.kind = CodecKind::External;
                else bad_value(qualified, value, "mock or external");
            } else if (key == "qp") cfg.codec.qp = static_cast<int>(parse_int(qualified, value));
            else if (key == "qps") cfg.qps = parse_int_list(qualified, value);
            else if (key == "encoder") cfg.codec.encoder_path = value;
            else if (key == "decoder") cfg.codec.decoder_path = value;
            else if (key == "encoder_template") cfg.codec.encoder_template = value;
            else if (key == "decoder_template") cfg.codec.decoder_template = value;
            else if (key == "extra_flags") {
                std::stringstream flags(value);
                std::string flag;
                while (flags >> flag) cfg.codec.extra_flags.push_back(flag);
            } else if (key == "keep_temp") cfg.codec.keep_temp = parse_bool(qualified, value);
            else throw FormatError("config: unknown key '" + qualified + "'");
        } else if (section == "model") {
            if (key == "channels") cfg.model.channels = static_cast<int>(parse_int(qualified, value));
            else if (key == "temporal_radius") cfg.model.temporal_radius = static_cast<int>(parse_int(qualified, value));
            else if (key == "rounds") cfg.model.rounds = static_cast<int>(parse_int(qualified, value));
            else if (key == "ofae_blocks") cfg.model.ofae_blocks = static_cast<int>(parse_int(qualified, value));
            else if (key == "offset_groups") cfg.model.offset_groups = static_cast<int>(parse_int(qualified, value));
            else if (key == "seed") cfg.model.seed = static_cast<uint64_t>(parse_int(qualified, value));
            else throw FormatError("config: unknown key '" + qualified + "'");
        } else if (section == "train") {
            if (key == "learning_rate") cfg.train.learning_rate = parse_double(qualified, value);
            else if (key == "beta1") cfg.train.beta1 = parse_double(qualified, value);
            else if (key == "beta2") cfg.train.beta2 = parse_double(qualified, value);
            else if (key == "adam_eps") cfg.train.adam_eps = parse_double(qualified, value);
            else if (key == "steps") cfg.train.steps = static_cast<int>(parse_int(qualified, value));
            else if (key == "batch_size") cfg.train.batch_size = static_cast<int>(parse_int(qualified, value));
            else if (key == "patch_size") cfg.train.patch_size = static_cast<int>(parse_int(qualified, value));
            else if (key == "stride") cfg.train.stride = static_cast<int>(parse_int(qualified, value));
            else if (key == "eps_loss") cfg.train.eps_loss = parse_double(qualified, value);
            else if (key == "seed") cfg.train.seed = static_cast<uint64_t>(parse_int(qualified, value));
            else if (key == "checkpoint_interval") cfg.train.checkpoint_interval = static_cast<int>(parse_int(qualified, value));
            else throw FormatError("config: unknown key '" + qualified + "'");
        } else { // paths
            if (key == "weights") cfg.weights = value;
            else if (key == "reference") cfg.reference = value;
            else if (key == "out_dir") cfg.out_dir = value;
            else throw FormatError("config: unknown key '" + qualified + "'");
        }
    }

    // Environment fallbacks for external codec binaries.
    if (cfg.codec.encoder_path.empty())
        if (const char* env = std::getenv("OVQE_ENCODER")) cfg.codec.encoder_path = env;
    if (cfg.codec.decoder_path.empty())
        if (const char* env = std::getenv("OVQE_DECODER")) cfg.codec.decoder_path = env;

    return cfg;
}

void validate_for(const RunConfig& cfg, Verb verb) {
    namespace fs = std::filesystem;

    require(!cfg.sequence.path.empty(), "[sequence] path is required");
    require(fs::exists(cfg.sequence.path),
            "[sequence] path does not exist: '" + cfg.sequence.path.string() + "'");
    require(cfg.sequence.width > 0 && cfg.sequence.height > 0,
            "[sequence] width/height must be positive");
    require(cfg.sequence.width % 2 == 0 && cfg.sequence.height % 2 == 0,
            "[sequence] width/height must be even for 4:2:0");
    require(cfg.sequence.bit_depth == 8 || cfg.sequence.bit_depth == 10,
            "[sequence] bit_depth must be 8 or 10");
    require(cfg.sequence.frame_rate > 0.0, "[sequence] frame_rate must be positive");
    require(!cfg.out_dir.empty(), "[paths] out_dir must not be empty");

    cfg.model.validate();

    const bool encodes = verb == Verb::Train || verb == Verb::Evaluate || verb == Verb::Bdrate;
    if (encodes && cfg.codec.kind == CodecKind::External) {
        require(!cfg.codec.encoder_path.empty(),
                "[codec] encoder (or OVQE_ENCODER) is required for kind=external");
        require(!cfg.codec.decoder_path.empty(),
                "[codec] decoder (or OVQE_DECODER) is required for kind=external");
        require(fs::exists(cfg.codec.encoder_path),
                "[codec] encoder binary not found: '" + cfg.codec.encoder_path + "'");
        require(fs::exists(cfg.codec.decoder_path),
                "[codec] decoder binary not found: '" + cfg.codec.decoder_path + "'");
    }
    if (encodes && cfg.codec.kind == CodecKind::Mock) {
        auto check_qp = [](int qp) {
            require(qp >= 0 && qp <= 51,
                    "[codec] qp " + std::to_string(qp) + " outside mock range [0, 51]");
        };
        if (verb == Verb::Bdrate) {
            require(!cfg.qps.empty(), "[codec] qps must not be empty for bdrate");
            for (int qp : cfg.qps) check_qp(qp);
        } else {
            check_qp(cfg.codec.qp);
        }
    }
    if (verb == Verb::Bdrate) {
        require(cfg.qps.size() >= 4, "[codec] bdrate needs at least 4 qps for the cubic fit");
        std::set<int> unique(cfg.qps.begin(), cfg.qps.end());
        require(unique.size() == cfg.qps.size(), "[codec] qps must be distinct");
    }

    switch (verb) {
        case Verb::Enhance:
            require(!cfg.weights.empty(), "[paths] weights is required for enhance");
            require(fs::exists(cfg.weights),
                    "[paths] weights not found: '" + cfg.weights.string() + "'");
            if (!cfg.reference.empty())
                require(fs::exists(cfg.reference),
                        "[paths] reference not found: '" + cfg.reference.string() + "'");
            break;
        case Verb::Train:
            require(!cfg.weights.empty(),
                    "[paths] weights (output checkpoint path) is required for train");
            cfg.train.validate();
            require(cfg.train.patch_size <= cfg.sequence.width &&
                        cfg.train.patch_size <= cfg.sequence.height,
                    "[train] patch_size must fit inside the sequence frames");
            break;
        case Verb::Evaluate:
            require(!cfg.weights.empty(), "[paths] weights is required for evaluate");
            require(fs::exists(cfg.weights),
                    "[paths] weights not found: '" + cfg.weights.string() + "'");
            break;
        case Verb::Bdrate:
            // No weights means no enhancer: both RD curves coincide and the
            // reported BD-rate is zero.
            if (!cfg.weights.empty())
                require(fs::exists(cfg.weights),
                        "[paths] weights not found: '" + cfg.weights.string() + "'");
            break;
    }
}

} // namespace ovqe
