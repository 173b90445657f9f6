#include "ovqe/report.hpp"

#include "ovqe/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace ovqe {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("report: cannot open '" + path.string() + "' for writing");
    return out;
}

std::string fmt(double v, const char* spec = "%.6f") {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), spec, v);
    return buf.data();
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Round a raw interval up to a 1/2/5 x 10^k tick step.
double nice_step(double span, int target_ticks) {
    const double raw = span / std::max(target_ticks, 1);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    double nice = 10.0;
    if (frac <= 1.0) nice = 1.0;
    else if (frac <= 2.0) nice = 2.0;
    else if (frac <= 5.0) nice = 5.0;
    return nice * mag;
}

} // namespace

void write_psnr_csv(const std::filesystem::path& path, const DeltaPsnrReport& report) {
    auto out = open_out(path);
    out << "frame,baseline_db,enhanced_db,delta_db\n";
    for (size_t i = 0; i < report.per_frame_delta.size(); ++i) {
        out << i << ',' << fmt(report.baseline.per_frame[i]) << ','
            << fmt(report.enhanced.per_frame[i]) << ',' << fmt(report.per_frame_delta[i])
            << '\n';
    }
    if (!out) throw IoError("report: write failed for '" + path.string() + "'");
}

void write_bdrate_csv(const std::filesystem::path& path, const std::vector<BdRateRow>& rows) {
    auto out = open_out(path);
    out << "sequence,anchor,test,bd_rate_percent\n";
    for (const auto& row : rows) {
        out << row.sequence << ',' << row.anchor << ',' << row.test << ','
            << fmt(row.bd_rate_percent) << '\n';
    }
    if (!out) throw IoError("report: write failed for '" + path.string() + "'");
}

void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<std::pair<int, double>>& trace) {
    auto out = open_out(path);
    out << "step,loss\n";
    for (const auto& [step, loss] : trace)
        out << step << ',' << fmt(loss, "%.9g") << '\n';
    if (!out) throw IoError("report: write failed for '" + path.string() + "'");
}

void write_rd_csv(const std::filesystem::path& path, const std::vector<int>& qps,
                  const std::vector<RDPoint>& baseline, const std::vector<RDPoint>& enhanced) {
    if (qps.size() != baseline.size() || qps.size() != enhanced.size())
        throw ArgumentError("report: rd csv needs matching qp/point counts");
    auto out = open_out(path);
    out << "qp,bitrate_kbps,baseline_psnr_db,enhanced_psnr_db\n";
    for (size_t i = 0; i < qps.size(); ++i) {
        out << qps[i] << ',' << fmt(baseline[i].bitrate_kbps, "%.4f") << ','
            << fmt(baseline[i].psnr_db) << ',' << fmt(enhanced[i].psnr_db) << '\n';
    }
    if (!out) throw IoError("report: write failed for '" + path.string() + "'");
}

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series) {
    constexpr double kWidth = 860.0, kHeight = 540.0;
    constexpr double kLeft = 72.0, kRight = 30.0, kTop = 48.0, kBottom = 64.0;
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    static const std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c",
                                                       "#9467bd", "#ff7f0e", "#17becf"};

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw ArgumentError("report: plot series '" + s.label + "' has mismatched x/y sizes");
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x_min = std::min(x_min, s.x[i]);
            x_max = std::max(x_max, s.x[i]);
            y_min = std::min(y_min, s.y[i]);
            y_max = std::max(y_max, s.y[i]);
        }
    }
    if (!(x_min <= x_max)) { // no finite points: draw an empty frame
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if (x_max - x_min < 1e-12) { x_min -= 1.0; x_max += 1.0; }
    if (y_max - y_min < 1e-12) { y_min -= 1.0; y_max += 1.0; }
    const double x_pad = 0.04 * (x_max - x_min);
    const double y_pad = 0.06 * (y_max - y_min);
    x_min -= x_pad; x_max += x_pad;
    y_min -= y_pad; y_max += y_pad;

    auto sx = [&](double v) { return kLeft + (v - x_min) / (x_max - x_min) * plot_w; };
    auto sy = [&](double v) { return kTop + (y_max - v) / (y_max - y_min) * plot_h; };

    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"17\">" << xml_escape(title) << "</text>\n";

    // Grid and ticks.
    const double x_step = nice_step(x_max - x_min, 7);
    const double y_step = nice_step(y_max - y_min, 6);
    out << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333\">\n";
    for (double v = std::ceil(x_min / x_step) * x_step; v <= x_max + 1e-9 * x_step; v += x_step) {
        const double px = sx(v);
        out << "<line x1=\"" << px << "\" y1=\"" << kTop << "\" x2=\"" << px << "\" y2=\""
            << kTop + plot_h << "\" stroke=\"#ddd\"/>\n"
            << "<text x=\"" << px << "\" y=\"" << kTop + plot_h + 18
            << "\" text-anchor=\"middle\">" << fmt(v, "%.6g") << "</text>\n";
    }
    for (double v = std::ceil(y_min / y_step) * y_step; v <= y_max + 1e-9 * y_step; v += y_step) {
        const double py = sy(v);
        out << "<line x1=\"" << kLeft << "\" y1=\"" << py << "\" x2=\"" << kLeft + plot_w
            << "\" y2=\"" << py << "\" stroke=\"#ddd\"/>\n"
            << "<text x=\"" << kLeft - 8 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\">" << fmt(v, "%.6g") << "</text>\n";
    }
    out << "</g>\n";

    // Axes.
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n"
        << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << xml_escape(x_label) << "</text>\n"
        << "<text x=\"20\" y=\"" << kTop + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
        << "transform=\"rotate(-90 20 " << kTop + plot_h / 2 << ")\">" << xml_escape(y_label)
        << "</text>\n";

    // Series polylines with point markers.
    for (size_t si = 0; si < series.size(); ++si) {
        const char* color = kColors[si % kColors.size()];
        std::string points;
        for (size_t i = 0; i < series[si].x.size(); ++i) {
            if (!std::isfinite(series[si].x[i]) || !std::isfinite(series[si].y[i])) continue;
            points += fmt(sx(series[si].x[i]), "%.2f") + ',' + fmt(sy(series[si].y[i]), "%.2f") + ' ';
        }
        if (!points.empty()) {
            out << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"2\"/>\n";
            for (size_t i = 0; i < series[si].x.size(); ++i) {
                if (!std::isfinite(series[si].x[i]) || !std::isfinite(series[si].y[i])) continue;
                out << "<circle cx=\"" << fmt(sx(series[si].x[i]), "%.2f") << "\" cy=\""
                    << fmt(sy(series[si].y[i]), "%.2f") << "\" r=\"3\" fill=\"" << color
                    << "\"/>\n";
            }
        }
    }

    // Legend.
    if (!series.empty()) {
        const double lx = kLeft + plot_w - 190.0, ly = kTop + 12.0;
        out << "<g font-family=\"sans-serif\" font-size=\"13\">\n"
            << "<rect x=\"" << lx - 10 << "\" y=\"" << ly - 10 << "\" width=\"196\" height=\""
            << 22.0 * series.size() + 8.0
            << "\" fill=\"white\" fill-opacity=\"0.85\" stroke=\"#999\"/>\n";
        for (size_t si = 0; si < series.size(); ++si) {
            const double row_y = ly + 22.0 * si + 5.0;
            out << "<line x1=\"" << lx << "\" y1=\"" << row_y << "\" x2=\"" << lx + 28
                << "\" y2=\"" << row_y << "\" stroke=\"" << kColors[si % kColors.size()]
                << "\" stroke-width=\"2\"/>\n"
                << "<text x=\"" << lx + 36 << "\" y=\"" << row_y + 4 << "\">"
                << xml_escape(series[si].label) << "</text>\n";
        }
        out << "</g>\n";
    }

    out << "</svg>\n";
    if (!out) throw IoError("report: write failed for '" + path.string() + "'");
}

} // namespace ovqe
