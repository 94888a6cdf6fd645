#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tland/matching.hpp"
#include "tland/model.hpp"

namespace tland {

/// Ordered distance thresholds (mm). The default is 0.1, 0.2, ..., 3.0.
class ThresholdGrid {
 public:
  explicit ThresholdGrid(std::vector<double> taus);

  // `include_zero` prepends tau = 0, which scores zero under the strict rule.
  static ThresholdGrid standard(bool include_zero = false);
  // Evenly spaced: step, 2*step, ..., max_tau (rounded to the nearest count).
  static ThresholdGrid uniform(double step, double max_tau, bool include_zero = false);

  std::span<const double> taus() const { return taus_; }
  std::size_t size() const { return taus_.size(); }
  double max() const { return taus_.back(); }

 private:
  std::vector<double> taus_;
};

struct PRPoint {
  double recall;
  double precision;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per ranked prediction
  std::size_t reference_count = 0;
};

// Hit flags must be in descending-score order.
PRCurve pr_curve(const std::vector<bool>& ranked_hits, std::size_t reference_count);

/// Area under the interpolated precision envelope:
///   sum_i (R_i - R_{i-1}) * max_{j >= i} P_j.
/// With no references: 1 if there are no predictions either, else 0.
double average_precision(const std::vector<bool>& ranked_hits, std::size_t reference_count);
double average_precision(const MatchTable& table, HitThreshold tau, HitRule rule = HitRule::Strict);

/// Normalized trapezoidal area under recall plotted against exp(-tau).
///
/// The area runs from exp(-tau_max) to exp(0) = 1 and is divided by
/// 1 - exp(-tau_max). If the grid starts above zero, recall on [0, tau_min]
/// is taken to be recall(tau_min).
double average_recall_from_curve(std::span<const double> taus, std::span<const double> recalls);
double average_recall(const MatchTable& table, const ThresholdGrid& grid,
                      HitRule rule = HitRule::Strict);

struct MeanAveragePrecision {
  std::vector<double> per_scan;  // mean AP over the grid, per table
  double aggregate = 0.0;        // unweighted mean over scans
};

// tables: one per scan, all of `category`. Throws ValidationError if empty.
MeanAveragePrecision mean_average_precision(std::span<const MatchTable> tables,
                                            const ThresholdGrid& grid, Category category,
                                            HitRule rule = HitRule::Strict);

struct EvalOptions {
  ThresholdGrid grid = ThresholdGrid::standard();
  HitRule hit_rule = HitRule::Strict;
  // Restrict assignment to references within each threshold (one table per
  // threshold) instead of one threshold-free table.
  bool assign_within_threshold = false;
  // Dataset-level PR curves instead of the mean of per-scan values.
  bool pooled = false;
  unsigned workers = 1;
};

struct CategoryScores {
  std::vector<double> ap_per_tau;
  std::vector<double> recall_per_tau;
  double ap = 0.0;  // mean of ap_per_tau
  double ar = 0.0;
  std::size_t references = 0;
  std::size_t predictions = 0;
  bool vacuous = false;  // no references and no predictions

  bool operator==(const CategoryScores&) const = default;
};

// Score one category of one scan. Inputs may contain other categories; they
// are filtered out.
CategoryScores score_category(std::span<const Prediction> predictions,
                              std::span<const Landmark> references, Category category,
                              const EvalOptions& options = {});

struct ScanReport {
  std::string scan_id;
  bool predictions_missing = false;
  std::array<CategoryScores, 4> categories;

  bool operator==(const ScanReport&) const = default;
};

struct CategorySummary {
  double map = 0.0;
  double mar = 0.0;

  bool operator==(const CategorySummary&) const = default;
};

struct MetricReport {
  std::vector<double> taus;
  bool pooled = false;
  std::vector<ScanReport> scans;  // ascending scan_id
  std::array<CategorySummary, 4> categories;
  double map = 0.0;  // mean of the four category mAPs
  double mar = 0.0;
  // Pooled PR curve per category and threshold, for plotting.
  std::array<std::vector<PRCurve>, 4> pr_curves;
  std::vector<std::string> warnings;
};

/// Evaluate a submission against ground truth.
///
/// Every prediction file must name a ground-truth scan; ground-truth scans
/// without a prediction file are scored against an empty prediction set and
/// listed in `warnings`. The result does not depend on options.workers.
MetricReport evaluate_submission(std::span<const LandmarkFile> ground_truth,
                                 std::span<const LandmarkFile> predictions,
                                 const EvalOptions& options = {});

// scan_id,category,metric,value with metric in {AP, AR} and AP@<tau>.
std::string report_csv(const MetricReport& report);
nlohmann::ordered_json report_summary_json(const MetricReport& report);

}  // namespace tland
