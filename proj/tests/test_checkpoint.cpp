#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ovqe/checkpoint.hpp"
#include "ovqe/errors.hpp"
#include "ovqe/net.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace ovqe;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.channels = 4;
    cfg.temporal_radius = 1;
    cfg.rounds = 1;
    cfg.ofae_blocks = 1;
    cfg.offset_groups = 2;
    cfg.seed = 2;
    return cfg;
}

fs::path temp_ckpt(const char* name) {
    return fs::temp_directory_path() / name;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("checkpoint round trip restores every parameter bit-exactly") {
    const auto path = temp_ckpt("ovqe_ckpt_rt.ovqe");
    Net<float> src(small_config());
    src.randomize_all(99);
    save_checkpoint(path, src.config(), src.params());

    Net<float> dst(small_config()); // different values until loaded
    load_checkpoint(path, dst);
    REQUIRE(dst.params().entries.size() == src.params().entries.size());
    for (size_t i = 0; i < src.params().entries.size(); ++i) {
        CHECK(dst.params().entries[i].name == src.params().entries[i].name);
        CHECK(dst.params().entries[i].value.data == src.params().entries[i].value.data);
    }
    fs::remove(path);
}

TEST_CASE("peek reads the architecture block") {
    const auto path = temp_ckpt("ovqe_ckpt_peek.ovqe");
    Net<float> net(small_config());
    save_checkpoint(path, net.config(), net.params());
    const ModelConfig peeked = peek_checkpoint_config(path);
    CHECK(peeked.channels == 4);
    CHECK(peeked.temporal_radius == 1);
    CHECK(peeked.rounds == 1);
    CHECK(peeked.ofae_blocks == 1);
    CHECK(peeked.offset_groups == 2);
    fs::remove(path);
}

TEST_CASE("float checkpoints load into a double net") {
    const auto path = temp_ckpt("ovqe_ckpt_f2d.ovqe");
    Net<float> src(small_config());
    src.randomize_all(7);
    save_checkpoint(path, src.config(), src.params());

    Net<double> dst(small_config());
    load_checkpoint(path, dst);
    for (size_t i = 0; i < src.params().entries.size(); ++i)
        for (size_t j = 0; j < src.params().entries[i].value.numel(); ++j)
            CHECK(dst.params().entries[i].value.data[j] ==
                  static_cast<double>(src.params().entries[i].value.data[j]));
    fs::remove(path);
}

TEST_CASE("architecture mismatch is rejected") {
    const auto path = temp_ckpt("ovqe_ckpt_arch.ovqe");
    Net<float> src(small_config());
    save_checkpoint(path, src.config(), src.params());

    ModelConfig other = small_config();
    other.channels = 8;
    Net<float> dst(other);
    CHECK_THROWS_AS(load_checkpoint(path, dst), FormatError);
    fs::remove(path);
}

TEST_CASE("corrupted containers are rejected") {
    const auto path = temp_ckpt("ovqe_ckpt_corrupt.ovqe");
    Net<float> src(small_config());
    save_checkpoint(path, src.config(), src.params());
    const auto good = slurp(path);

    SUBCASE("bad magic") {
        auto bytes = good;
        bytes[0] = 'X';
        dump(path, bytes);
        Net<float> dst(small_config());
        CHECK_THROWS_AS(load_checkpoint(path, dst), FormatError);
    }
    SUBCASE("unsupported version") {
        auto bytes = good;
        bytes[8] = 99; // version u32 little-endian
        dump(path, bytes);
        Net<float> dst(small_config());
        CHECK_THROWS_AS(load_checkpoint(path, dst), FormatError);
    }
    SUBCASE("truncated payload") {
        auto bytes = good;
        bytes.resize(bytes.size() / 2);
        dump(path, bytes);
        Net<float> dst(small_config());
        CHECK_THROWS_AS(load_checkpoint(path, dst), FormatError);
    }
    SUBCASE("trailing garbage") {
        auto bytes = good;
        bytes.push_back('z');
        dump(path, bytes);
        Net<float> dst(small_config());
        CHECK_THROWS_AS(load_checkpoint(path, dst), FormatError);
    }
    fs::remove(path);
}

TEST_CASE("unknown parameter names are rejected") {
    const auto path = temp_ckpt("ovqe_ckpt_name.ovqe");
    Net<float> src(small_config());
    save_checkpoint(path, src.config(), src.params());
    auto bytes = slurp(path);

    // The first record's name starts right after magic(8) + version(4) +
    // config(20) + count(4) + name_len(4). Flip a character inside it.
    const size_t name_start = 8 + 4 + 20 + 4 + 4;
    bytes[name_start] = bytes[name_start] == 'z' ? 'y' : 'z';
    dump(path, bytes);
    Net<float> dst(small_config());
    CHECK_THROWS_AS(load_checkpoint(path, dst), FormatError);
    fs::remove(path);
}

TEST_CASE("missing file raises an io error") {
    Net<float> dst(small_config());
    CHECK_THROWS_AS(load_checkpoint("/no/such/dir/w.ovqe", dst), IoError);
    CHECK_THROWS_AS(peek_checkpoint_config("/no/such/dir/w.ovqe"), IoError);
}

TEST_CASE("save rejects unwritable destinations") {
    Net<float> net(small_config());
    CHECK_THROWS_AS(save_checkpoint("/no/such/dir/w.ovqe", net.config(), net.params()),
                    IoError);
}
