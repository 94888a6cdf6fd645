#include "tland/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "tland/parallel.hpp"
#include "tland/text.hpp"

namespace tland {

ThresholdGrid::ThresholdGrid(std::vector<double> taus) : taus_(std::move(taus)) {
  if (taus_.empty()) throw ValidationError("threshold grid is empty");
  for (std::size_t i = 0; i < taus_.size(); ++i) {
    const double t = taus_[i];
    if (!std::isfinite(t) || t < 0.0 || (t == 0.0 && i != 0)) {
      throw ValidationError("threshold grid values must be finite and positive (only the first may be 0)");
    }
    if (i > 0 && !(t > taus_[i - 1])) throw ValidationError("threshold grid must be strictly increasing");
  }
}

ThresholdGrid ThresholdGrid::standard(bool include_zero) { return uniform(0.1, 3.0, include_zero); }

ThresholdGrid ThresholdGrid::uniform(double step, double max_tau, bool include_zero) {
  if (!(step > 0.0) || !(max_tau >= step)) throw ValidationError("invalid threshold grid step/max");
  const auto count = static_cast<long>(std::llround(max_tau / step));
  std::vector<double> taus;
  if (include_zero) taus.push_back(0.0);
  // max * i / count keeps 0.1 * i at the correctly rounded decimal value.
  for (long i = 1; i <= count; ++i) taus.push_back(max_tau * static_cast<double>(i) / static_cast<double>(count));
  return ThresholdGrid(std::move(taus));
}

PRCurve pr_curve(const std::vector<bool>& ranked_hits, std::size_t reference_count) {
  PRCurve curve;
  curve.reference_count = reference_count;
  curve.points.reserve(ranked_hits.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked_hits.size(); ++k) {
    if (ranked_hits[k]) ++tp;
    const double recall = reference_count == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(reference_count);
    curve.points.push_back({recall, static_cast<double>(tp) / static_cast<double>(k + 1)});
  }
  return curve;
}

double average_precision(const std::vector<bool>& ranked_hits, std::size_t reference_count) {
  if (reference_count == 0) return ranked_hits.empty() ? 1.0 : 0.0;
  const PRCurve curve = pr_curve(ranked_hits, reference_count);
  const auto& pts = curve.points;
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].recall > prev_recall) {
      ap += (pts[i].recall - prev_recall) * envelope[i];
      prev_recall = pts[i].recall;
    }
  }
  return std::clamp(ap, 0.0, 1.0);
}

double average_precision(const MatchTable& table, HitThreshold tau, HitRule rule) {
  const HitCounts h = hits(table, tau, rule);
  return average_precision(h.flags, table.reference_count);
}

double average_recall_from_curve(std::span<const double> taus, std::span<const double> recalls) {
  if (taus.empty() || taus.size() != recalls.size()) {
    throw ValidationError("recall curve needs one recall per threshold");
  }
  double area = 0.0;
  double prev_x = std::exp(-taus[0]);
  double prev_r = recalls[0];
  if (taus[0] > 0.0) area += (1.0 - prev_x) * prev_r;
  for (std::size_t k = 1; k < taus.size(); ++k) {
    const double x = std::exp(-taus[k]);
    area += (prev_x - x) * 0.5 * (prev_r + recalls[k]);
    prev_x = x;
    prev_r = recalls[k];
  }
  const double normalizer = 1.0 - std::exp(-taus.back());
  return std::clamp(area / normalizer, 0.0, 1.0);
}

double average_recall(const MatchTable& table, const ThresholdGrid& grid, HitRule rule) {
  if (table.reference_count == 0) return table.rows.empty() ? 1.0 : 0.0;
  std::vector<double> recalls;
  recalls.reserve(grid.size());
  for (double tau : grid.taus()) {
    const HitCounts h = hits(table, HitThreshold(tau), rule);
    recalls.push_back(static_cast<double>(h.true_positives) / static_cast<double>(table.reference_count));
  }
  return average_recall_from_curve(grid.taus(), recalls);
}

MeanAveragePrecision mean_average_precision(std::span<const MatchTable> tables,
                                            const ThresholdGrid& grid, Category category,
                                            HitRule rule) {
  if (tables.empty()) throw ValidationError("mean_average_precision: no scans");
  MeanAveragePrecision out;
  out.per_scan.reserve(tables.size());
  for (const auto& table : tables) {
    if (table.category != category) throw ValidationError("mean_average_precision: category mismatch");
    double sum = 0.0;
    for (double tau : grid.taus()) sum += average_precision(table, HitThreshold(tau), rule);
    out.per_scan.push_back(sum / static_cast<double>(grid.size()));
  }
  out.aggregate = std::accumulate(out.per_scan.begin(), out.per_scan.end(), 0.0) /
                  static_cast<double>(out.per_scan.size());
  return out;
}

namespace {

struct CategoryTables {
  // One table, or one per threshold when assignment is threshold-limited.
  std::vector<MatchTable> tables;
  const MatchTable& at(std::size_t k) const { return tables.size() == 1 ? tables[0] : tables[k]; }
};

CategoryTables build_tables(std::span<const Prediction> predictions, std::span<const Landmark> references,
                            Category category, const EvalOptions& options) {
  CategoryTables out;
  if (!options.assign_within_threshold) {
    out.tables.push_back(assign(predictions, references, category));
    return out;
  }
  for (double tau : options.grid.taus()) {
    AssignOptions ao;
    ao.max_distance = options.hit_rule == HitRule::Strict
                          ? tau
                          : std::nextafter(tau, std::numeric_limits<double>::infinity());
    out.tables.push_back(assign(predictions, references, category, ao));
  }
  return out;
}

CategoryScores score_tables(const CategoryTables& ct, const EvalOptions& options) {
  CategoryScores s;
  const MatchTable& first = ct.at(0);
  s.references = first.reference_count;
  s.predictions = first.rows.size();
  s.vacuous = s.references == 0 && s.predictions == 0;
  const auto taus = options.grid.taus();
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const MatchTable& table = ct.at(k);
    const HitCounts h = hits(table, HitThreshold(taus[k]), options.hit_rule);
    s.ap_per_tau.push_back(average_precision(h.flags, table.reference_count));
    if (table.reference_count == 0) {
      s.recall_per_tau.push_back(table.rows.empty() ? 1.0 : 0.0);
    } else {
      s.recall_per_tau.push_back(static_cast<double>(h.true_positives) /
                                 static_cast<double>(table.reference_count));
    }
  }
  s.ap = std::accumulate(s.ap_per_tau.begin(), s.ap_per_tau.end(), 0.0) / static_cast<double>(taus.size());
  if (s.references == 0) {
    s.ar = s.predictions == 0 ? 1.0 : 0.0;
  } else {
    s.ar = average_recall_from_curve(taus, s.recall_per_tau);
  }
  return s;
}

struct RankedFlag {
  double score;
  bool hit;
};

}  // namespace

CategoryScores score_category(std::span<const Prediction> predictions, std::span<const Landmark> references,
                              Category category, const EvalOptions& options) {
  const auto preds = select_category(predictions, category);
  const auto refs = select_category(references, category);
  return score_tables(build_tables(preds, refs, category, options), options);
}

MetricReport evaluate_submission(std::span<const LandmarkFile> ground_truth,
                                 std::span<const LandmarkFile> predictions, const EvalOptions& options) {
  std::map<std::string, const LandmarkFile*> gt_by_scan;
  for (const auto& gt : ground_truth) {
    if (!gt_by_scan.emplace(gt.scan_id, &gt).second) {
      throw ValidationError("duplicate ground-truth scan '" + gt.scan_id + "'");
    }
  }
  std::map<std::string, const LandmarkFile*> pred_by_scan;
  for (const auto& p : predictions) {
    if (!gt_by_scan.count(p.scan_id)) {
      throw ValidationError("prediction scan '" + p.scan_id + "' has no ground truth");
    }
    if (!pred_by_scan.emplace(p.scan_id, &p).second) {
      throw ValidationError("duplicate prediction file for scan '" + p.scan_id + "'");
    }
  }

  MetricReport report;
  report.taus.assign(options.grid.taus().begin(), options.grid.taus().end());
  report.pooled = options.pooled;

  std::vector<const LandmarkFile*> gts;
  for (const auto& [id, f] : gt_by_scan) gts.push_back(f);
  const std::size_t n = gts.size();
  report.scans.resize(n);
  std::vector<std::array<CategoryTables, 4>> tables(n);

  parallel_for(n, options.workers, [&](std::size_t i) {
    const LandmarkFile& gt = *gts[i];
    const auto refs = gt.landmarks();
    std::vector<Prediction> preds;
    auto it = pred_by_scan.find(gt.scan_id);
    if (it != pred_by_scan.end()) preds = it->second->predictions();
    ScanReport& scan = report.scans[i];
    scan.scan_id = gt.scan_id;
    scan.predictions_missing = it == pred_by_scan.end();
    for (Category c : kAllCategories) {
      const auto cp = select_category(std::span<const Prediction>(preds), c);
      const auto cr = select_category(std::span<const Landmark>(refs), c);
      tables[i][index_of(c)] = build_tables(cp, cr, c, options);
      scan.categories[index_of(c)] = score_tables(tables[i][index_of(c)], options);
    }
  });

  for (const auto& scan : report.scans) {
    if (scan.predictions_missing) {
      report.warnings.push_back("scan '" + scan.scan_id + "': no prediction file, evaluated as empty");
    }
  }

  const auto taus = options.grid.taus();
  for (Category c : kAllCategories) {
    const std::size_t ci = index_of(c);
    // Pooled curves: merge every scan's rows by descending score; ties keep
    // scan order then row order.
    std::vector<double> pooled_ap;
    std::vector<double> pooled_recall;
    std::size_t total_refs = 0;
    std::size_t total_preds = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total_refs += tables[i][ci].at(0).reference_count;
      total_preds += tables[i][ci].at(0).rows.size();
    }
    for (std::size_t k = 0; k < taus.size(); ++k) {
      std::vector<RankedFlag> ranked;
      std::size_t tp = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const MatchTable& t = tables[i][ci].at(k);
        for (const auto& row : t.rows) {
          const bool h = is_hit(row, HitThreshold(taus[k]), options.hit_rule);
          tp += h ? 1 : 0;
          ranked.push_back({row.score, h});
        }
      }
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const RankedFlag& a, const RankedFlag& b) { return a.score > b.score; });
      std::vector<bool> flags;
      flags.reserve(ranked.size());
      for (const auto& r : ranked) flags.push_back(r.hit);
      report.pr_curves[ci].push_back(pr_curve(flags, total_refs));
      pooled_ap.push_back(average_precision(flags, total_refs));
      pooled_recall.push_back(total_refs == 0 ? (total_preds == 0 ? 1.0 : 0.0)
                                              : static_cast<double>(tp) / static_cast<double>(total_refs));
    }

    CategorySummary& summary = report.categories[ci];
    if (options.pooled) {
      summary.map = std::accumulate(pooled_ap.begin(), pooled_ap.end(), 0.0) / static_cast<double>(taus.size());
      summary.mar = total_refs == 0 ? (total_preds == 0 ? 1.0 : 0.0)
                                    : average_recall_from_curve(taus, pooled_recall);
    } else if (n > 0) {
      double ap_sum = 0.0;
      double ar_sum = 0.0;
      for (const auto& scan : report.scans) {
        ap_sum += scan.categories[ci].ap;
        ar_sum += scan.categories[ci].ar;
      }
      summary.map = ap_sum / static_cast<double>(n);
      summary.mar = ar_sum / static_cast<double>(n);
    }
  }
  double map_sum = 0.0;
  double mar_sum = 0.0;
  for (const auto& s : report.categories) {
    map_sum += s.map;
    mar_sum += s.mar;
  }
  report.map = map_sum / 4.0;
  report.mar = mar_sum / 4.0;
  return report;
}

std::string report_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "scan_id,category,metric,value\r\n";
  for (const auto& scan : report.scans) {
    const std::string id = csv_escape(scan.scan_id);
    for (Category c : kAllCategories) {
      const CategoryScores& s = scan.categories[index_of(c)];
      const std::string_view cat = to_string(c);
      out << id << ',' << cat << ",AP," << format_double(s.ap) << "\r\n";
      out << id << ',' << cat << ",AR," << format_double(s.ar) << "\r\n";
      for (std::size_t k = 0; k < report.taus.size(); ++k) {
        out << id << ',' << cat << ",AP@" << format_double(report.taus[k]) << ','
            << format_double(s.ap_per_tau[k]) << "\r\n";
      }
    }
  }
  return out.str();
}

nlohmann::ordered_json report_summary_json(const MetricReport& report) {
  using json = nlohmann::ordered_json;
  json root = json::object();
  root["scans"] = report.scans.size();
  root["aggregation"] = report.pooled ? "pooled" : "per_scan";
  root["taus"] = report.taus;
  root["mAP"] = report.map;
  root["mAR"] = report.mar;
  json cats = json::object();
  for (Category c : kAllCategories) {
    const auto& s = report.categories[index_of(c)];
    cats[std::string(to_string(c))] = json{{"mAP", s.map}, {"mAR", s.mar}};
  }
  root["categories"] = std::move(cats);
  json vacuous = json::array();
  for (const auto& scan : report.scans) {
    for (Category c : kAllCategories) {
      if (scan.categories[index_of(c)].vacuous) {
        vacuous.push_back(json{{"scan_id", scan.scan_id}, {"category", std::string(to_string(c))}});
      }
    }
  }
  root["vacuous"] = std::move(vacuous);
  root["warnings"] = report.warnings;
  return root;
}

}  // namespace tland
