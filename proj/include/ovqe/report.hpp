#pragma once

#include "ovqe/metrics.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ovqe {

// CSV artifacts. The column layouts are fixed contracts; the SVG plots next
// to them are a convenience rendering of the same data.

// Columns: frame,baseline_db,enhanced_db,delta_db
void write_psnr_csv(const std::filesystem::path& path, const DeltaPsnrReport& report);

struct BdRateRow {
    std::string sequence;
    std::string anchor;
    std::string test;
    double bd_rate_percent = 0.0;
};

// Columns: sequence,anchor,test,bd_rate_percent
void write_bdrate_csv(const std::filesystem::path& path, const std::vector<BdRateRow>& rows);

// Columns: step,loss
void write_loss_csv(const std::filesystem::path& path,
                    const std::vector<std::pair<int, double>>& trace);

// Columns: qp,bitrate_kbps,baseline_psnr_db,enhanced_psnr_db (one row per QP)
void write_rd_csv(const std::filesystem::path& path, const std::vector<int>& qps,
                  const std::vector<RDPoint>& baseline, const std::vector<RDPoint>& enhanced);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal standalone SVG line plot: axes, tick grid, one polyline with point
// markers per series, legend in the top-right corner. Non-finite samples are
// dropped from the drawing (CSVs keep them).
void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         const std::string& x_label, const std::string& y_label,
                         const std::vector<PlotSeries>& series);

} // namespace ovqe
