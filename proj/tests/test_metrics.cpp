#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ovqe/errors.hpp"
#include "ovqe/metrics.hpp"
#include "synthetic.hpp"

#include <cmath>
#include <random>

using namespace ovqe;

namespace {

Plane const_plane(int w, int h, int depth, uint16_t v) {
    Plane p(w, h, depth, v);
    return p;
}

std::vector<RDPoint> anchor_curve() {
    // Shaped like a plausible mock-codec sweep: rate up, quality up.
    return {{100.0, 30.0}, {180.0, 33.2}, {320.0, 36.1}, {600.0, 38.9}};
}

std::vector<RDPoint> scaled_rate(const std::vector<RDPoint>& pts, double factor) {
    auto out = pts;
    for (auto& p : out) p.bitrate_kbps *= factor;
    return out;
}

} // namespace

TEST_CASE("psnr closed forms") {
    // MSE of exactly 1 on 8-bit planes: 20*log10(255) = 48.1308 dB.
    Plane a = const_plane(16, 16, 8, 100);
    Plane b = const_plane(16, 16, 8, 101);
    CHECK(psnr(a, b) == doctest::Approx(48.1308).epsilon(1e-6));

    // MSE of 4 costs exactly 10*log10(4) ~ 6.0206 dB more.
    Plane c = const_plane(16, 16, 8, 102);
    CHECK(psnr(a, c) == doctest::Approx(48.1308 - 10.0 * std::log10(4.0)).epsilon(1e-6));

    // 10-bit peak raises the same MSE=1 figure to 20*log10(1023).
    Plane hi_a = const_plane(8, 8, 10, 500);
    Plane hi_b = const_plane(8, 8, 10, 501);
    CHECK(psnr(hi_a, hi_b) == doctest::Approx(20.0 * std::log10(1023.0)).epsilon(1e-9));
}

TEST_CASE("identical planes yield the infinite sentinel") {
    Plane a = const_plane(8, 8, 8, 42);
    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a) > 0);
}

TEST_CASE("psnr is symmetric") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> ud(0, 255);
    Plane a(12, 10, 8), b(12, 10, 8);
    for (size_t i = 0; i < a.samples.size(); ++i) {
        a.samples[i] = static_cast<uint16_t>(ud(rng));
        b.samples[i] = static_cast<uint16_t>(ud(rng));
    }
    CHECK(psnr(a, b) == psnr(b, a));
}

TEST_CASE("psnr rejects mismatched planes") {
    Plane a = const_plane(8, 8, 8, 1);
    Plane b = const_plane(8, 4, 8, 1);
    CHECK_THROWS_AS(psnr(a, b), ArgumentError);
    Plane c = const_plane(8, 8, 10, 1);
    CHECK_THROWS_AS(psnr(a, c), ArgumentError);
}

TEST_CASE("psnr report averages finite frames and counts the rest") {
    Sequence ref = ovqe::testing::moving_texture_clip(3, 16, 16);
    Sequence test = ref; // frame 0 identical -> +inf
    test.frames[1].y.at(0, 0) ^= 0x7;
    test.frames[2].y.at(3, 3) ^= 0x9;

    const PsnrReport rep = psnr_report(test, ref);
    REQUIRE(rep.per_frame.size() == 3);
    CHECK(std::isinf(rep.per_frame[0]));
    CHECK(rep.excluded_infinite == 1);
    CHECK(rep.average ==
          doctest::Approx((rep.per_frame[1] + rep.per_frame[2]) / 2.0).epsilon(1e-12));
}

TEST_CASE("delta psnr of identical chains is flat zero") {
    Sequence ref = ovqe::testing::moving_texture_clip(3, 16, 16);
    Sequence dec = ref;
    dec.frames[0].y.at(1, 1) ^= 0x3;
    dec.frames[1].y.at(1, 2) ^= 0x3;
    dec.frames[2].y.at(1, 3) ^= 0x3;

    const DeltaPsnrReport rep = delta_psnr(dec, dec, ref);
    for (double d : rep.per_frame_delta) CHECK(d == 0.0);
    CHECK(rep.average_delta == 0.0);
}

TEST_CASE("delta psnr treats doubly-lossless frames as zero gain") {
    Sequence ref = ovqe::testing::moving_texture_clip(2, 16, 16);
    Sequence dec = ref; // frame 0 lossless in both chains
    Sequence enh = ref;
    dec.frames[1].y.at(0, 0) ^= 0xF;
    enh.frames[1].y.at(0, 0) ^= 0x3;

    const DeltaPsnrReport rep = delta_psnr(enh, dec, ref);
    CHECK(rep.per_frame_delta[0] == 0.0);
    CHECK(std::isfinite(rep.per_frame_delta[1]));
    CHECK(rep.average_delta == doctest::Approx(rep.per_frame_delta[1]).epsilon(1e-12));
}

TEST_CASE("log-rate fit reproduces the sampled points") {
    // Four points determine the cubic exactly, so the fit must interpolate.
    const auto pts = anchor_curve();
    const LogRateFit fit = fit_log_rate(pts);
    for (const auto& p : pts)
        CHECK(fit.eval(p.psnr_db) == doctest::Approx(std::log10(p.bitrate_kbps)).epsilon(1e-9));
}

TEST_CASE("fit integral matches Simpson quadrature") {
    const LogRateFit fit = fit_log_rate(anchor_curve());
    const double lo = 30.5, hi = 38.0;

    const int n = 4096;
    double acc = fit.eval(lo) + fit.eval(hi);
    for (int i = 1; i < n; ++i)
        acc += fit.eval(lo + (hi - lo) * i / n) * (i % 2 == 1 ? 4.0 : 2.0);
    const double simpson = acc * (hi - lo) / (3.0 * n);

    CHECK(fit.integral(lo, hi) == doctest::Approx(simpson).epsilon(1e-10));
}

TEST_CASE("bd-rate of identical curves is zero") {
    const auto pts = anchor_curve();
    CHECK(std::abs(bd_rate(pts, pts)) < 1e-9);
}

TEST_CASE("bd-rate of a uniform rate scaling is exact") {
    const auto pts = anchor_curve();
    CHECK(bd_rate(pts, scaled_rate(pts, 0.8)) == doctest::Approx(-20.0).epsilon(1e-6));
    CHECK(bd_rate(pts, scaled_rate(pts, 1.25)) == doctest::Approx(25.0).epsilon(1e-6));
}

TEST_CASE("bd-rate sign tracks quality shifts") {
    const auto pts = anchor_curve();
    auto better = pts;
    for (auto& p : better) p.psnr_db += 0.5; // same rate, more quality
    CHECK(bd_rate(pts, better) < 0.0);
    auto worse = pts;
    for (auto& p : worse) p.psnr_db -= 0.5;
    CHECK(bd_rate(pts, worse) > 0.0);
}

TEST_CASE("curve fitting refuses malformed sweeps") {
    auto pts = anchor_curve();
    pts.pop_back();
    CHECK_THROWS_AS(fit_log_rate(pts), ArgumentError); // fewer than 4 points

    auto non_monotone_rate = anchor_curve();
    std::swap(non_monotone_rate[1].bitrate_kbps, non_monotone_rate[2].bitrate_kbps);
    CHECK_THROWS_AS(fit_log_rate(non_monotone_rate), ArgumentError);

    auto non_monotone_psnr = anchor_curve();
    non_monotone_psnr[2].psnr_db = non_monotone_psnr[1].psnr_db - 0.1;
    CHECK_THROWS_AS(fit_log_rate(non_monotone_psnr), ArgumentError);

    auto zero_rate = anchor_curve();
    zero_rate[0].bitrate_kbps = 0.0;
    CHECK_THROWS_AS(fit_log_rate(zero_rate), ArgumentError);

    // Disjoint PSNR ranges leave no overlap to integrate.
    auto high = anchor_curve();
    for (auto& p : high) p.psnr_db += 100.0;
    CHECK_THROWS_AS(bd_rate(anchor_curve(), high), ArgumentError);
}

TEST_CASE("rd sweep without an enhancer returns identical curves") {
    Sequence raw = ovqe::testing::moving_texture_clip(2, 32, 32);
    CodecSpec spec;
    const RDSweepResult sweep =
        rd_sweep(raw, {47, 42, 37, 32}, spec, std::filesystem::temp_directory_path(), nullptr);
    REQUIRE(sweep.baseline.size() == 4);
    REQUIRE(sweep.enhanced.size() == 4);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(sweep.baseline[i].bitrate_kbps == sweep.enhanced[i].bitrate_kbps);
        CHECK(sweep.baseline[i].psnr_db == sweep.enhanced[i].psnr_db);
    }
    CHECK(std::abs(bd_rate(sweep.baseline, sweep.enhanced)) < 1e-9);
}
