#include "ovqe/checkpoint.hpp"

#include "ovqe/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <string>

namespace ovqe {

namespace {

constexpr char kMagic[8] = {'O', 'V', 'Q', 'E', 'W', 'T', 'S', '\0'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<uint32_t>(v)); }

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint: truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

ModelConfig read_header(std::istream& is, const std::filesystem::path& path) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("checkpoint: " + path.string() + " is not a weight container");
    const uint32_t version = get_u32(is);
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
    ModelConfig cfg;
    cfg.channels = static_cast<int>(get_u32(is));
    cfg.temporal_radius = static_cast<int>(get_u32(is));
    cfg.rounds = static_cast<int>(get_u32(is));
    cfg.ofae_blocks = static_cast<int>(get_u32(is));
    cfg.offset_groups = static_cast<int>(get_u32(is));
    return cfg;
}

std::string describe(const ModelConfig& c) {
    return "C=" + std::to_string(c.channels) + " R=" + std::to_string(c.temporal_radius) +
           " N=" + std::to_string(c.rounds) + " ofae=" + std::to_string(c.ofae_blocks) +
           " groups=" + std::to_string(c.offset_groups);
}

} // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ParamStore<T>& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open " + path.string() + " for writing");
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    put_u32(os, static_cast<uint32_t>(cfg.channels));
    put_u32(os, static_cast<uint32_t>(cfg.temporal_radius));
    put_u32(os, static_cast<uint32_t>(cfg.rounds));
    put_u32(os, static_cast<uint32_t>(cfg.ofae_blocks));
    put_u32(os, static_cast<uint32_t>(cfg.offset_groups));
    put_u32(os, static_cast<uint32_t>(params.entries.size()));
    for (const auto& e : params.entries) {
        put_u32(os, static_cast<uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        put_u32(os, static_cast<uint32_t>(e.value.rank()));
        for (int d = 0; d < e.value.rank(); ++d) put_u32(os, static_cast<uint32_t>(e.value.dim(d)));
        for (const T v : e.value.data) put_f32(os, static_cast<float>(v));
    }
    if (!os) throw IoError("checkpoint: write to " + path.string() + " failed");
}

ModelConfig peek_checkpoint_config(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path.string());
    return read_header(is, path);
}

template <typename T>
void load_checkpoint(const std::filesystem::path& path, Net<T>& net) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path.string());
    const ModelConfig file_cfg = read_header(is, path);
    if (!net.config().same_architecture(file_cfg))
        throw FormatError("checkpoint: architecture mismatch, file has " + describe(file_cfg) +
                          " but the requested config is " + describe(net.config()));

    const uint32_t count = get_u32(is);
    if (count != net.params().entries.size())
        throw FormatError("checkpoint: expected " + std::to_string(net.params().entries.size()) +
                          " parameter records, file has " + std::to_string(count));

    std::set<std::string> seen;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = get_u32(is);
        if (name_len == 0 || name_len > 4096) throw FormatError("checkpoint: bad record name");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw FormatError("checkpoint: truncated file");
        if (!net.params().has(name))
            throw FormatError("checkpoint: unknown parameter record '" + name + "'");
        if (!seen.insert(name).second)
            throw FormatError("checkpoint: duplicate parameter record '" + name + "'");

        auto& entry = net.params().at(name);
        const uint32_t rank = get_u32(is);
        if (static_cast<int>(rank) != entry.value.rank())
            throw FormatError("checkpoint: parameter '" + name + "' rank mismatch");
        size_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            const uint32_t dim = get_u32(is);
            if (static_cast<int>(dim) != entry.value.dim(static_cast<int>(d)))
                throw FormatError("checkpoint: parameter '" + name + "' shape mismatch, expected " +
                                  shape_string(entry.value));
            numel *= dim;
        }
        for (size_t k = 0; k < numel; ++k) entry.value.data[k] = static_cast<T>(get_f32(is));
    }
    is.peek();
    if (!is.eof())
        throw FormatError("checkpoint: trailing bytes after the last parameter record");
}

template void save_checkpoint<float>(const std::filesystem::path&, const ModelConfig&,
                                     const ParamStore<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const ModelConfig&,
                                      const ParamStore<double>&);
template void load_checkpoint<float>(const std::filesystem::path&, Net<float>&);
template void load_checkpoint<double>(const std::filesystem::path&, Net<double>&);

} // namespace ovqe
