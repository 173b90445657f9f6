#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ovqe/graph.hpp"

#include <cmath>
#include <random>

using namespace ovqe;
using T64 = TensorT<double>;

namespace {

T64 rnd(const std::vector<int>& shape, uint64_t seed) {
    T64 t(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (auto& v : t.data) v = ud(rng);
    return t;
}

// Gather with a single uniform (dy,dx) on every tap of a 3x3 window over one
// offset group, unit mask. Tap k then reads feat at (y + ky-1 + dy, x + kx-1 + dx).
T64 uniform_gather(const T64& feat, double dy, double dx) {
    Graph<double> g(false);
    const int H = feat.dim(1), W = feat.dim(2);
    T64 offsets({18, H, W});
    for (int k = 0; k < 9; ++k)
        for (int i = 0; i < H * W; ++i) {
            offsets.data[static_cast<size_t>(2 * k) * H * W + i] = dy;
            offsets.data[static_cast<size_t>(2 * k + 1) * H * W + i] = dx;
        }
    T64 mask({9, H, W});
    mask.fill(1.0);
    return g.deformable_gather(g.value(feat), g.value(offsets), g.value(mask), 1, 3).val();
}

} // namespace

TEST_CASE("integer offsets reproduce explicit shifts exactly") {
    const T64 feat = rnd({2, 8, 8}, 1);
    for (auto [dy, dx] : {std::pair{0, 0}, std::pair{2, -1}, std::pair{-3, 3}}) {
        const T64 out = uniform_gather(feat, dy, dx);
        REQUIRE(out.shape == std::vector<int>{18, 8, 8});
        for (int k = 0; k < 9; ++k) {
            const int ky = k / 3 - 1, kx = k % 3 - 1;
            for (int c = 0; c < 2; ++c)
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) {
                        const int sy = y + ky + dy, sx = x + kx + dx;
                        const double expect =
                            (sy >= 0 && sy < 8 && sx >= 0 && sx < 8) ? feat.at(c, sy, sx) : 0.0;
                        // Integer positions hit grid points, so the bilinear
                        // weights collapse to exact 0/1 and equality is exact.
                        CHECK(out.at(k * 2 + c, y, x) == expect);
                    }
        }
    }
}

TEST_CASE("fractional offsets on affine ramps match the analytic bilinear value") {
    // f(y, x) = a + b*y + c*x is reproduced exactly by bilinear interpolation.
    const double a = 0.37, b = -0.211, c = 0.149;
    T64 feat({1, 10, 10});
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) feat.at(0, y, x) = a + b * y + c * x;

    for (auto [dy, dx] : {std::pair{0.3, -0.6}, std::pair{-0.45, 0.2}, std::pair{0.75, 0.75}}) {
        const T64 out = uniform_gather(feat, dy, dx);
        for (int k = 0; k < 9; ++k) {
            const int ky = k / 3 - 1, kx = k % 3 - 1;
            // Stay far enough inside that every sampled corner is in-frame.
            for (int y = 3; y < 7; ++y)
                for (int x = 3; x < 7; ++x) {
                    const double expect = a + b * (y + ky + dy) + c * (x + kx + dx);
                    CHECK(out.at(k, y, x) == doctest::Approx(expect).epsilon(1e-6));
                }
        }
    }
}

TEST_CASE("mask scales each tap independently") {
    const T64 feat = rnd({1, 6, 6}, 2);
    Graph<double> g(false);
    T64 offsets({18, 6, 6}); // zero offsets: taps read the plain 3x3 window
    T64 mask({9, 6, 6});
    for (int k = 0; k < 9; ++k)
        for (int i = 0; i < 36; ++i) mask.data[static_cast<size_t>(k) * 36 + i] = 0.1 * k;

    const T64 out =
        g.deformable_gather(g.value(feat), g.value(offsets), g.value(mask), 1, 3).val();
    const T64 plain = uniform_gather(feat, 0.0, 0.0);
    for (int k = 0; k < 9; ++k)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x)
                CHECK(out.at(k, y, x) == doctest::Approx(0.1 * k * plain.at(k, y, x)));
}

TEST_CASE("offset groups move independently") {
    // Two groups of one channel each: shift group 0 by +1 column and group 1
    // by -1 column, and check the channels moved opposite ways.
    const T64 feat = rnd({2, 6, 6}, 3);
    Graph<double> g(false);
    T64 offsets({2 * 9 * 2, 6, 6});
    T64 mask({2 * 9, 6, 6});
    mask.fill(1.0);
    for (int grp = 0; grp < 2; ++grp)
        for (int k = 0; k < 9; ++k)
            for (int i = 0; i < 36; ++i) {
                const size_t base = (static_cast<size_t>(grp) * 9 + k) * 2;
                offsets.data[(base + 1) * 36 + i] = grp == 0 ? 1.0 : -1.0; // dx only
            }

    const T64 out =
        g.deformable_gather(g.value(feat), g.value(offsets), g.value(mask), 2, 3).val();
    // Center tap (k=4) of channel 0 reads column x+1, channel 1 reads x-1.
    for (int y = 1; y < 5; ++y)
        for (int x = 1; x < 5; ++x) {
            CHECK(out.at(4 * 2 + 0, y, x) == feat.at(0, y, x + 1));
            CHECK(out.at(4 * 2 + 1, y, x) == feat.at(1, y, x - 1));
        }
}

TEST_CASE("deformable gather rejects malformed fields") {
    Graph<double> g(false);
    auto feat = g.value(rnd({2, 4, 4}, 4));
    CHECK_THROWS_AS(g.deformable_gather(feat, g.value(T64({17, 4, 4})), g.value(T64({9, 4, 4})),
                                        1, 3),
                    ArgumentError); // offsets must be {G*K*2,H,W}
    CHECK_THROWS_AS(g.deformable_gather(feat, g.value(T64({18, 4, 4})), g.value(T64({8, 4, 4})),
                                        1, 3),
                    ArgumentError); // mask must be {G*K,H,W}
    CHECK_THROWS_AS(g.deformable_gather(feat, g.value(T64({54, 4, 4})), g.value(T64({27, 4, 4})),
                                        3, 3),
                    ArgumentError); // 2 channels cannot split into 3 groups
}
