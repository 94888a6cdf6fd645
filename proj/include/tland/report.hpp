#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tland/metrics.hpp"

namespace tland {

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::span<const double> values);

struct NamedSeries {
  std::string name;
  std::vector<double> values;
};

struct NamedCurve {
  std::string name;
  std::vector<PRPoint> points;
};

// Values are drawn on a fixed [0, 1] axis.
std::string boxplot_svg(const std::string& title, std::span<const NamedSeries> series);
std::string pr_curve_svg(const std::string& title, std::span<const NamedCurve> curves);

// category,tau,rank,recall,precision
std::string pr_curves_csv(const MetricReport& report);
// category,metric,count,min,q1,median,q3,max,mean
std::string boxplot_csv(const MetricReport& report);

// Files written by `tland eval`: per_scan.csv, summary.json, pr_curves.csv,
// boxplot.csv.
void write_eval_data(const MetricReport& report, const std::filesystem::path& out_dir);

/// Renders SVG plots and summary tables from the CSV files of an eval
/// directory: boxplot_<category>.svg, pr_<category>.svg,
/// summary_table.csv, boxplot_table.csv. Returns the written paths.
std::vector<std::filesystem::path> render_report(const std::filesystem::path& eval_dir,
                                                 const std::filesystem::path& out_dir);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tland
