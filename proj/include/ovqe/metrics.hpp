#pragma once

#include "ovqe/codec.hpp"
#include "ovqe/frame.hpp"
#include "ovqe/net.hpp"

#include <filesystem>
#include <vector>

namespace ovqe {

// Peak signal-to-noise ratio in dB over one plane pair;
// +infinity is the sentinel for identical planes (MSE = 0).
double psnr(const Plane& a, const Plane& b);

struct PsnrReport {
    std::vector<double> per_frame;
    double average = 0.0;   // mean of the finite per-frame values
    int excluded_infinite = 0; // +inf frames left out of the average
};

// Per-frame luma PSNR of seq against ref.
PsnrReport psnr_report(const Sequence& seq, const Sequence& ref);

struct DeltaPsnrReport {
    PsnrReport baseline; // decoded vs reference
    PsnrReport enhanced; // enhanced vs reference
    std::vector<double> per_frame_delta;
    double average_delta = 0.0; // mean over frames where both chains are finite
};

// Pairs two per-chain reports into the delta view: delta_t is enhanced minus
// baseline, 0 when both frames are lossless, averaged over finite frames.
DeltaPsnrReport pair_reports(PsnrReport baseline, PsnrReport enhanced);

DeltaPsnrReport delta_psnr(const Sequence& enhanced, const Sequence& decoded,
                           const Sequence& reference);

struct RDPoint {
    double bitrate_kbps = 0.0;
    double psnr_db = 0.0;
};

// Coefficients of the least-squares cubic of log10(rate) in the centered,
// scaled PSNR variable u = (psnr - center) / scale.
struct LogRateFit {
    double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
    double center = 0, scale = 1;

    double eval(double psnr_db) const;
    // Definite integral of the fitted log10(rate) over [lo, hi] in dB.
    double integral(double lo, double hi) const;
};

LogRateFit fit_log_rate(const std::vector<RDPoint>& points);

// Classic Bjontegaard delta bitrate in percent: fit both curves, average
// the log-rate gap over the PSNR overlap, map back from the log domain.
// Negative means the test curve spends less bitrate at equal quality.
double bd_rate(const std::vector<RDPoint>& anchor, const std::vector<RDPoint>& test);

struct RDSweepResult {
    std::vector<int> qps;
    std::vector<RDPoint> baseline;
    std::vector<RDPoint> enhanced;
    std::vector<PsnrReport> baseline_reports;
    std::vector<PsnrReport> enhanced_reports;
};

// Encodes/decodes raw at every QP, optionally runs the enhancer on each
// decode, and measures (bitrate, mean luma PSNR) for both chains. With no
// enhancer the curves are identical.
RDSweepResult rd_sweep(const Sequence& raw, const std::vector<int>& qps, const CodecSpec& spec,
                       const std::filesystem::path& workdir, Net<float>* enhancer);

} // namespace ovqe
