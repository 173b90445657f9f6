#include "ovqe/metrics.hpp"

#include "ovqe/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace ovqe {

double psnr(const Plane& a, const Plane& b) {
    if (a.width != b.width || a.height != b.height || a.bit_depth != b.bit_depth)
        throw ArgumentError("psnr: plane geometry or bit depth mismatch");
    if (a.sample_count() == 0) throw ArgumentError("psnr: empty planes");
    double sq = 0.0;
    for (size_t i = 0; i < a.samples.size(); ++i) {
        const double d = static_cast<double>(a.samples[i]) - static_cast<double>(b.samples[i]);
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(a.sample_count());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    const double peak = static_cast<double>(a.max_value());
    return 10.0 * std::log10(peak * peak / mse);
}

PsnrReport psnr_report(const Sequence& seq, const Sequence& ref) {
    if (seq.frame_count() != ref.frame_count())
        throw ArgumentError("psnr: sequence lengths differ (" + std::to_string(seq.frame_count()) +
                            " vs " + std::to_string(ref.frame_count()) + ")");
    if (seq.empty()) throw ArgumentError("psnr: empty sequences");
    PsnrReport report;
    double sum = 0.0;
    int finite = 0;
    for (size_t t = 0; t < seq.frame_count(); ++t) {
        const double db = psnr(seq.frames[t].y, ref.frames[t].y);
        report.per_frame.push_back(db);
        if (std::isinf(db)) {
            ++report.excluded_infinite;
        } else {
            sum += db;
            ++finite;
        }
    }
    report.average = finite > 0 ? sum / finite : std::numeric_limits<double>::infinity();
    return report;
}

DeltaPsnrReport pair_reports(PsnrReport baseline, PsnrReport enhanced) {
    if (baseline.per_frame.size() != enhanced.per_frame.size())
        throw ArgumentError("delta psnr: reports are not length-matched");
    DeltaPsnrReport report;
    report.baseline = std::move(baseline);
    report.enhanced = std::move(enhanced);
    double sum = 0.0;
    int finite = 0;
    for (size_t t = 0; t < report.baseline.per_frame.size(); ++t) {
        const double e = report.enhanced.per_frame[t];
        const double d = report.baseline.per_frame[t];
        double delta;
        if (std::isinf(e) && std::isinf(d)) {
            delta = 0.0; // both chains are lossless on this frame
        } else {
            delta = e - d;
        }
        report.per_frame_delta.push_back(delta);
        if (std::isfinite(e) && std::isfinite(d)) {
            sum += delta;
            ++finite;
        }
    }
    report.average_delta = finite > 0 ? sum / finite : 0.0;
    return report;
}

DeltaPsnrReport delta_psnr(const Sequence& enhanced, const Sequence& decoded,
                           const Sequence& reference) {
    if (enhanced.frame_count() != decoded.frame_count() ||
        decoded.frame_count() != reference.frame_count())
        throw ArgumentError("delta psnr: the three sequences are not length-matched");
    return pair_reports(psnr_report(decoded, reference), psnr_report(enhanced, reference));
}

double LogRateFit::eval(double psnr_db) const {
    const double u = (psnr_db - center) / scale;
    return ((c3 * u + c2) * u + c1) * u + c0;
}

double LogRateFit::integral(double lo, double hi) const {
    auto anti = [&](double p) {
        const double u = (p - center) / scale;
        // scale * integral of the cubic in u
        return scale * (((c3 / 4 * u + c2 / 3) * u + c1 / 2) * u + c0) * u;
    };
    return anti(hi) - anti(lo);
}

LogRateFit fit_log_rate(const std::vector<RDPoint>& points) {
    if (points.size() < 4)
        throw ArgumentError("bd-rate: need at least 4 RD points, got " +
                            std::to_string(points.size()));
    for (size_t i = 0; i < points.size(); ++i) {
        if (!(points[i].bitrate_kbps > 0.0))
            throw ArgumentError("bd-rate: bitrate must be positive for the log-domain fit");
        if (!std::isfinite(points[i].psnr_db))
            throw ArgumentError("bd-rate: non-finite PSNR in RD points");
        if (i > 0 && !(points[i].bitrate_kbps > points[i - 1].bitrate_kbps &&
                       points[i].psnr_db > points[i - 1].psnr_db))
            throw ArgumentError("bd-rate: RD points must have strictly increasing bitrate and "
                                "PSNR (refusing to sort silently)");
    }

    LogRateFit fit;
    double mean = 0.0;
    for (const auto& p : points) mean += p.psnr_db;
    fit.center = mean / static_cast<double>(points.size());
    fit.scale = (points.back().psnr_db - points.front().psnr_db) / 2.0;

    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd a(n, 4);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = (points[static_cast<size_t>(i)].psnr_db - fit.center) / fit.scale;
        a(i, 0) = 1.0;
        a(i, 1) = u;
        a(i, 2) = u * u;
        a(i, 3) = u * u * u;
        y(i) = std::log10(points[static_cast<size_t>(i)].bitrate_kbps);
    }
    const Eigen::Vector4d c = a.colPivHouseholderQr().solve(y);
    fit.c0 = c(0);
    fit.c1 = c(1);
    fit.c2 = c(2);
    fit.c3 = c(3);
    return fit;
}

double bd_rate(const std::vector<RDPoint>& anchor, const std::vector<RDPoint>& test) {
    const LogRateFit fa = fit_log_rate(anchor);
    const LogRateFit ft = fit_log_rate(test);
    const double lo = std::max(anchor.front().psnr_db, test.front().psnr_db);
    const double hi = std::min(anchor.back().psnr_db, test.back().psnr_db);
    if (!(hi > lo))
        throw ArgumentError("bd-rate: the anchor and test PSNR ranges do not overlap");
    const double avg_gap = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    return (std::pow(10.0, avg_gap) - 1.0) * 100.0;
}

RDSweepResult rd_sweep(const Sequence& raw, const std::vector<int>& qps, const CodecSpec& spec,
                       const std::filesystem::path& workdir, Net<float>* enhancer) {
    if (qps.empty()) throw ArgumentError("rd sweep: QP list is empty");
    raw.validate();
    RDSweepResult result;
    result.qps = qps;
    for (const int qp : qps) {
        CodecSpec per_qp = spec;
        per_qp.qp = qp;
        const CodecResult coded = encode_decode(raw, per_qp, workdir);

        PsnrReport base = psnr_report(coded.decoded, raw);
        result.baseline.push_back(RDPoint{coded.bitrate_kbps, base.average});
        result.baseline_reports.push_back(std::move(base));

        if (enhancer) {
            const Sequence enhanced = enhancer->enhance_sequence(coded.decoded);
            PsnrReport enh = psnr_report(enhanced, raw);
            result.enhanced.push_back(RDPoint{coded.bitrate_kbps, enh.average});
            result.enhanced_reports.push_back(std::move(enh));
        } else {
            result.enhanced.push_back(result.baseline.back());
            result.enhanced_reports.push_back(result.baseline_reports.back());
        }
    }
    return result;
}

} // namespace ovqe
