#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ovqe/errors.hpp"
#include "ovqe/graph.hpp"

#include <cmath>
#include <functional>
#include <random>

using namespace ovqe;
using T64 = TensorT<double>;
using V64 = Var<double>;
using G64 = Graph<double>;

namespace {

T64 rnd(const std::vector<int>& shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    T64 t(shape);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(lo, hi);
    for (auto& v : t.data) v = ud(rng);
    return t;
}

using Builder = std::function<V64(G64&, const std::vector<V64>&)>;

// Checks every analytic input gradient of a scalar-valued builder against
// central finite differences. All the graph ops are smooth (SiLU/sigmoid
// activations, Charbonnier reductions), so h = 1e-6 in double precision
// leaves comfortable headroom against the 1e-6 relative tolerance.
void check_grads(std::vector<T64> inputs, const Builder& build, double tol = 1e-6,
                 double h = 1e-6) {
    std::vector<T64> sinks;
    sinks.reserve(inputs.size());
    for (const auto& t : inputs) sinks.emplace_back(t.shape);

    G64 g(true);
    std::vector<V64> vars;
    for (size_t i = 0; i < inputs.size(); ++i) vars.push_back(g.param(inputs[i], &sinks[i]));
    g.backward(build(g, vars));

    const auto eval = [&](const std::vector<T64>& in) {
        G64 ng(false);
        std::vector<V64> vs;
        vs.reserve(in.size());
        for (const auto& t : in) vs.push_back(ng.value(t));
        return build(ng, vs).val().data[0];
    };

    for (size_t k = 0; k < inputs.size(); ++k) {
        for (size_t i = 0; i < inputs[k].numel(); ++i) {
            auto plus = inputs, minus = inputs;
            plus[k].data[i] += h;
            minus[k].data[i] -= h;
            const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
            const double analytic = sinks[k].data[i];
            const double err = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1.0});
            CHECK(err <= tol);
        }
    }
}

// Scalar-valued readout that keeps every output element in play.
V64 reduce(G64& g, const V64& y, uint64_t seed) {
    return g.charbonnier(y, g.value(rnd(y.val().shape, seed, -2.0, 2.0)), 0.01);
}

} // namespace

TEST_CASE("pointwise op values") {
    G64 g(false);
    auto x = g.value(T64({1, 1, 3}, {0.0, 1.0, -2.0}));
    auto s = g.silu(x);
    CHECK(s.val().data[0] == doctest::Approx(0.0));
    CHECK(s.val().data[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    auto sg = g.sigmoid(x);
    CHECK(sg.val().data[0] == doctest::Approx(0.5));
    auto af = g.affine(x, 2.0, 1.0);
    CHECK(af.val().data[2] == doctest::Approx(-3.0));
    auto sum = g.add(x, x);
    CHECK(sum.val().data[1] == doctest::Approx(2.0));
    auto diff = g.sub(sum, x);
    CHECK(diff.val().data[2] == doctest::Approx(-2.0));
}

TEST_CASE("structural op values") {
    G64 g(false);
    auto a = g.value(T64({1, 2, 2}, {1, 2, 3, 4}));
    auto b = g.value(T64({2, 2, 2}, {5, 6, 7, 8, 9, 10, 11, 12}));
    auto cat = g.concat_ch({a, b});
    REQUIRE(cat.val().shape == std::vector<int>{3, 2, 2});
    CHECK(cat.val().at(0, 1, 1) == 4);
    CHECK(cat.val().at(2, 0, 0) == 9);

    auto gate = g.value(T64({3, 1, 1}, {2.0, 0.5, -1.0}));
    auto scaled = g.mul_bcast(cat, gate);
    CHECK(scaled.val().at(0, 0, 0) == doctest::Approx(2.0));
    CHECK(scaled.val().at(1, 1, 1) == doctest::Approx(4.0));
    CHECK(scaled.val().at(2, 0, 1) == doctest::Approx(-10.0));

    auto pooled = g.avg_pool2(a);
    REQUIRE(pooled.val().shape == std::vector<int>{1, 1, 1});
    CHECK(pooled.val().data[0] == doctest::Approx(2.5));

    auto up = g.upsample2(pooled);
    REQUIRE(up.val().shape == std::vector<int>{1, 2, 2});
    for (double v : up.val().data) CHECK(v == doctest::Approx(2.5));

    auto mean = g.global_avg(b);
    REQUIRE(mean.val().shape == std::vector<int>{2, 1, 1});
    CHECK(mean.val().data[0] == doctest::Approx(6.5));
    CHECK(mean.val().data[1] == doctest::Approx(10.5));
}

TEST_CASE("conv2d identity kernel and hand-computed values") {
    G64 g(false);
    auto x = g.value(rnd({2, 4, 4}, 10));

    // Center-tap identity with a per-channel bias shift.
    T64 w({2, 2, 3, 3});
    w.data[0 * 18 + 0 * 9 + 4] = 1.0; // out 0 <- in 0 center
    w.data[1 * 18 + 1 * 9 + 4] = 1.0; // out 1 <- in 1 center
    auto y = g.conv2d(x, g.value(w), g.value(T64({2}, {0.25, -0.5})));
    for (int c = 0; c < 2; ++c)
        for (int r = 0; r < 4; ++r)
            for (int col = 0; col < 4; ++col)
                CHECK(y.val().at(c, r, col) ==
                      doctest::Approx(x.val().at(c, r, col) + (c == 0 ? 0.25 : -0.5)));

    // Direct-summation reference at a border pixel (zero padding) and an
    // interior pixel, arbitrary 3x3 kernel, dilation 1 and 2.
    auto w2 = rnd({1, 2, 3, 3}, 11);
    auto b2 = rnd({1}, 12);
    for (int dil : {1, 2}) {
        auto z = g.conv2d(x, g.value(w2), g.value(b2), dil);
        for (auto [r, c] : {std::pair{0, 0}, std::pair{2, 1}}) {
            double acc = b2.data[0];
            for (int ci = 0; ci < 2; ++ci)
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const int sr = r + dil * (ky - 1), sc = c + dil * (kx - 1);
                        if (sr < 0 || sr >= 4 || sc < 0 || sc >= 4) continue;
                        acc += w2.data[(static_cast<size_t>(ci) * 3 + ky) * 3 + kx] *
                               x.val().at(ci, sr, sc);
                    }
            CHECK(z.val().at(0, r, c) == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("gaussian kernel and blur basics") {
    for (double sigma : {1.0, 2.0}) {
        const auto k = gaussian_kernel(sigma);
        CHECK(static_cast<int>(k.size()) == 2 * static_cast<int>(std::lround(3.0 * sigma)) + 1);
        double sum = 0.0;
        for (double v : k) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        for (size_t i = 0; i < k.size() / 2; ++i)
            CHECK(k[i] == doctest::Approx(k[k.size() - 1 - i]).epsilon(1e-12));
    }

    // The symmetric fold plus a normalised kernel keeps constants constant.
    G64 g(false);
    auto c = g.value(T64({1, 6, 6}, std::vector<double>(36, 0.75)));
    auto blurred = g.gaussian_blur(c, 2.0);
    for (double v : blurred.val().data) CHECK(v == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("fold_index reflects with edge repeat") {
    CHECK(fold_index(0, 4) == 0);
    CHECK(fold_index(3, 4) == 3);
    CHECK(fold_index(-1, 4) == 0);
    CHECK(fold_index(-2, 4) == 1);
    CHECK(fold_index(4, 4) == 3);
    CHECK(fold_index(5, 4) == 2);
    CHECK(fold_index(9, 4) == 1); // wraps through a full period
    CHECK(fold_index(-5, 4) == 3);
    CHECK(fold_index(7, 1) == 0);
}

TEST_CASE("charbonnier closed forms") {
    G64 g(false);
    auto x = g.value(T64({1, 2, 2}, {0.3, -0.7, 1.1, 0.0}));
    auto same = g.charbonnier(x, x, 1e-6);
    CHECK(same.val().data[0] == doctest::Approx(1e-3).epsilon(1e-12));

    auto a = g.value(T64({1, 1, 1}, {5.0}));
    auto b = g.value(T64({1, 1, 1}, {2.0}));
    auto one = g.charbonnier(a, b, 1e-6);
    CHECK(one.val().data[0] == doctest::Approx(std::sqrt(9.0 + 1e-6)).epsilon(1e-14));
}

TEST_CASE("gradients: pointwise and structural ops") {
    check_grads({rnd({2, 4, 4}, 20)},
                [](G64& g, const std::vector<V64>& v) { return reduce(g, g.silu(v[0]), 1); });
    check_grads({rnd({2, 4, 4}, 21)},
                [](G64& g, const std::vector<V64>& v) { return reduce(g, g.sigmoid(v[0]), 2); });
    check_grads({rnd({2, 4, 4}, 22)}, [](G64& g, const std::vector<V64>& v) {
        return reduce(g, g.affine(v[0], -1.5, 0.25), 3);
    });
    check_grads({rnd({2, 4, 4}, 23), rnd({2, 4, 4}, 24)}, [](G64& g, const std::vector<V64>& v) {
        return reduce(g, g.sub(g.add(v[0], v[1]), v[0]), 4);
    });
    check_grads({rnd({1, 4, 4}, 25), rnd({2, 4, 4}, 26)}, [](G64& g, const std::vector<V64>& v) {
        return reduce(g, g.concat_ch({v[0], v[1]}), 5);
    });
    check_grads({rnd({2, 4, 4}, 27), rnd({2, 1, 1}, 28)}, [](G64& g, const std::vector<V64>& v) {
        return reduce(g, g.mul_bcast(v[0], v[1]), 6);
    });
    check_grads({rnd({2, 4, 4}, 29)},
                [](G64& g, const std::vector<V64>& v) { return reduce(g, g.avg_pool2(v[0]), 7); });
    check_grads({rnd({2, 2, 2}, 30)}, [](G64& g, const std::vector<V64>& v) {
        return reduce(g, g.upsample2(v[0]), 8);
    });
    check_grads({rnd({3, 4, 4}, 31)}, [](G64& g, const std::vector<V64>& v) {
        return reduce(g, g.global_avg(v[0]), 9);
    });
}

TEST_CASE("gradients: conv2d in x, w, and b") {
    for (int dil : {1, 2}) {
        check_grads({rnd({2, 5, 5}, 40), rnd({3, 2, 3, 3}, 41, -0.5, 0.5), rnd({3}, 42)},
                    [dil](G64& g, const std::vector<V64>& v) {
                        return reduce(g, g.conv2d(v[0], v[1], v[2], dil), 10 + dil);
                    });
    }
    // 1x1 convolutions take the direct GEMM fast path.
    check_grads({rnd({3, 4, 4}, 43), rnd({2, 3, 1, 1}, 44), rnd({2}, 45)},
                [](G64& g, const std::vector<V64>& v) {
                    return reduce(g, g.conv2d(v[0], v[1], v[2]), 13);
                });
}

TEST_CASE("gradients: gaussian blur") {
    for (double sigma : {1.0, 2.0}) {
        check_grads({rnd({1, 5, 5}, 50)}, [sigma](G64& g, const std::vector<V64>& v) {
            return reduce(g, g.gaussian_blur(v[0], sigma), 14);
        });
    }
}

TEST_CASE("gradients: deformable gather in feat, offsets, and mask") {
    // Offsets are kept a fixed distance from integers: bilinear sampling has
    // gradient kinks at integer crossings where finite differences break.
    T64 offsets({1 * 9 * 2, 5, 5});
    std::mt19937_64 rng(60);
    std::uniform_real_distribution<double> mag(0.15, 0.45);
    std::bernoulli_distribution sign(0.5);
    for (auto& v : offsets.data) v = (sign(rng) ? 1.0 : -1.0) * mag(rng);

    check_grads({rnd({2, 5, 5}, 61), offsets, rnd({9, 5, 5}, 62, 0.1, 0.9)},
                [](G64& g, const std::vector<V64>& v) {
                    return reduce(g, g.deformable_gather(v[0], v[1], v[2], 1, 3), 15);
                },
                1e-5);
}

TEST_CASE("gradients: charbonnier matches its closed-form derivative") {
    const auto pred = rnd({1, 3, 3}, 70);
    const auto target = rnd({1, 3, 3}, 71);
    const double eps = 1e-6;

    T64 sink(pred.shape);
    G64 g(true);
    auto p = g.param(pred, &sink);
    g.backward(g.charbonnier(p, g.value(target), eps));

    const double n = static_cast<double>(pred.numel());
    for (size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred.data[i] - target.data[i];
        const double expected = d / (n * std::sqrt(d * d + eps));
        CHECK(sink.data[i] == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("shared parameters accumulate gradients across uses") {
    const auto x = rnd({1, 2, 2}, 80);
    T64 sink(x.shape);
    G64 g(true);
    auto p1 = g.param(x, &sink);
    auto p2 = g.param(x, &sink); // same sink: two uses of one weight
    g.backward(g.charbonnier(g.add(p1, p2), g.value(T64({1, 2, 2})), 0.01));

    T64 single_sink(x.shape);
    G64 g2(true);
    auto q = g2.param(x, &single_sink);
    g2.backward(g2.charbonnier(g2.affine(q, 2.0, 0.0), g2.value(T64({1, 2, 2})), 0.01));
    for (size_t i = 0; i < x.numel(); ++i)
        CHECK(sink.data[i] == doctest::Approx(single_sink.data[i]).epsilon(1e-12));
}

TEST_CASE("graph misuse is rejected") {
    G64 g(true);
    auto x = g.value(rnd({1, 2, 2}, 90));
    auto loss = g.charbonnier(x, x, 0.01);
    CHECK_THROWS_AS(g.backward(x), ArgumentError); // non-scalar loss
    g.backward(loss);
    CHECK_THROWS_AS(g.backward(loss), ArgumentError); // backward twice

    G64 frozen(false);
    auto y = frozen.value(rnd({1, 2, 2}, 91));
    auto l2 = frozen.charbonnier(y, y, 0.01);
    CHECK_THROWS_AS(frozen.backward(l2), ArgumentError);

    G64 g3(true);
    auto a = g3.value(rnd({1, 2, 2}, 92));
    auto b = g3.value(rnd({1, 2, 3}, 93));
    CHECK_THROWS_AS(g3.add(a, b), ArgumentError);
    CHECK_THROWS_AS(g3.concat_ch({}), ArgumentError);
    CHECK_THROWS_AS(g3.mul_bcast(a, b), ArgumentError);
    CHECK_THROWS_AS(g3.conv2d(a, g3.value(rnd({1, 1, 2, 2}, 94)), g3.value(rnd({1}, 95))),
                    ArgumentError); // even kernel
    auto odd = g3.value(rnd({1, 3, 3}, 96));
    CHECK_THROWS_AS(g3.avg_pool2(odd), ArgumentError);
}
