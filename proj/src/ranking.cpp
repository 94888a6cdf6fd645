#include "tland/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tland/parallel.hpp"
#include "tland/rng.hpp"
#include "tland/text.hpp"

namespace tland {

namespace {

struct SignedRanks {
  // Doubled average ranks so tied ranks stay integral.
  std::vector<std::int64_t> doubled;
  std::vector<bool> negative;
};

SignedRanks rank_differences(std::span<const double> diffs, ZeroMethod zero_method) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (zero_method == ZeroMethod::Pratt || diffs[i] != 0.0) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });
  SignedRanks out;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i + 1;
    while (j < idx.size() && std::abs(diffs[idx[j]]) == std::abs(diffs[idx[i]])) ++j;
    // Ranks i+1 .. j, average (i+1+j)/2, doubled i+1+j.
    const auto doubled = static_cast<std::int64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (diffs[idx[k]] == 0.0) continue;
      out.doubled.push_back(doubled);
      out.negative.push_back(diffs[idx[k]] < 0.0);
    }
    i = j;
  }
  return out;
}

// P(S <= observed) where S sums a uniformly random subset of `ranks`.
double exact_lower_tail(std::span<const std::int64_t> ranks, std::int64_t observed) {
  const std::int64_t total = std::accumulate(ranks.begin(), ranks.end(), std::int64_t{0});
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  std::int64_t reach = 0;
  for (std::int64_t r : ranks) {
    for (std::int64_t s = reach; s >= 0; --s) {
      if (counts[static_cast<std::size_t>(s)] != 0.0) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
    }
    reach += r;
  }
  double below = 0.0;
  for (std::int64_t s = 0; s <= std::min(observed, total); ++s) below += counts[static_cast<std::size_t>(s)];
  return std::ldexp(below, -static_cast<int>(ranks.size()));
}

double normal_lower_tail(std::span<const std::int64_t> doubled, double w_minus) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::int64_t d : doubled) {
    const double r = 0.5 * static_cast<double>(d);
    sum += r;
    sum_sq += r * r;
  }
  // Conditional moments given the tie pattern; equals the usual
  // n(n+1)/4, n(n+1)(2n+1)/24 - sum(t^3 - t)/48 form.
  const double mean = 0.5 * sum;
  const double sd = std::sqrt(0.25 * sum_sq);
  const double z = (w_minus - mean + 0.5) / sd;
  return std::clamp(0.5 * std::erfc(-z / std::sqrt(2.0)), 0.0, 1.0);
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    const WilcoxonOptions& options) {
  if (x.size() != y.size() || x.empty()) {
    throw ValidationError("wilcoxon_signed_rank: samples must be non-empty and paired");
  }
  std::vector<double> diffs(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diffs[i] = x[i] - y[i];
  const SignedRanks ranks = rank_differences(diffs, options.zero_method);

  WilcoxonResult result;
  result.n_nonzero = ranks.doubled.size();
  if (result.n_nonzero == 0) {
    result.no_evidence = true;
    result.p_value = 1.0;
    return result;
  }
  std::int64_t minus2 = 0;
  std::int64_t plus2 = 0;
  for (std::size_t i = 0; i < ranks.doubled.size(); ++i) (ranks.negative[i] ? minus2 : plus2) += ranks.doubled[i];
  result.w_minus = 0.5 * static_cast<double>(minus2);
  result.w_plus = 0.5 * static_cast<double>(plus2);

  const bool exact = options.method == PValueMethod::Exact ||
                     (options.method == PValueMethod::Auto && result.n_nonzero <= options.exact_max_n);
  result.exact = exact;
  // Small W- is evidence for x > y.
  result.p_value = exact ? exact_lower_tail(ranks.doubled, minus2) : normal_lower_tail(ranks.doubled, result.w_minus);
  return result;
}

void MetricSamples::validate() const {
  if (values.size() != teams.size()) throw ValidationError("metric samples: team count mismatch");
  for (const auto& team : values) {
    if (team.size() != streams.size()) throw ValidationError("metric samples: stream count mismatch");
    for (const auto& stream : team) {
      if (stream.size() != scan_ids.size()) throw ValidationError("metric samples: scan count mismatch");
      for (double v : stream) {
        if (!std::isfinite(v)) throw ValidationError("metric samples: non-finite value");
      }
    }
  }
}

MetricSamples build_metric_samples(std::span<const std::string> teams, std::span<const MetricReport> reports,
                                   StreamSelection selection) {
  if (teams.size() != reports.size()) throw ValidationError("one report per team required");
  MetricSamples samples;
  samples.teams.assign(teams.begin(), teams.end());
  if (selection == StreamSelection::PerCategory) {
    for (Category c : kAllCategories) {
      samples.streams.push_back(std::string(to_string(c)) + ".AP");
      samples.streams.push_back(std::string(to_string(c)) + ".AR");
    }
  } else {
    samples.streams = {"mAP", "mAR"};
  }
  if (!reports.empty()) {
    for (const auto& scan : reports[0].scans) samples.scan_ids.push_back(scan.scan_id);
  }
  for (const auto& report : reports) {
    if (report.scans.size() != samples.scan_ids.size()) throw ValidationError("team reports cover different scans");
    std::vector<std::vector<double>> team(samples.streams.size());
    for (std::size_t s = 0; s < report.scans.size(); ++s) {
      const ScanReport& scan = report.scans[s];
      if (scan.scan_id != samples.scan_ids[s]) throw ValidationError("team reports cover different scans");
      if (selection == StreamSelection::PerCategory) {
        for (Category c : kAllCategories) {
          const auto& cs = scan.categories[index_of(c)];
          team[2 * index_of(c)].push_back(cs.ap);
          team[2 * index_of(c) + 1].push_back(cs.ar);
        }
      } else {
        double ap = 0.0;
        double ar = 0.0;
        for (const auto& cs : scan.categories) {
          ap += cs.ap;
          ar += cs.ar;
        }
        team[0].push_back(ap / 4.0);
        team[1].push_back(ar / 4.0);
      }
    }
    samples.values.push_back(std::move(team));
  }
  samples.validate();
  return samples;
}

namespace {

std::vector<double> gather(const std::vector<double>& values, std::span<const std::size_t> scans) {
  std::vector<double> out;
  out.reserve(scans.size());
  for (std::size_t s : scans) out.push_back(values[s]);
  return out;
}

}  // namespace

std::vector<std::size_t> points_round(const MetricSamples& samples, std::span<const std::size_t> scans,
                                      const RankingOptions& options) {
  const std::size_t teams = samples.team_count();
  if (teams < 2) throw ValidationError("ranking needs at least two teams");
  for (std::size_t s : scans) {
    if (s >= samples.scan_count()) throw ValidationError("scan index out of range");
  }
  std::vector<std::size_t> points(teams, 0);
  for (std::size_t st = 0; st < samples.stream_count(); ++st) {
    std::vector<std::vector<double>> columns(teams);
    for (std::size_t t = 0; t < teams; ++t) columns[t] = gather(samples.values[t][st], scans);
    for (std::size_t a = 0; a < teams; ++a) {
      for (std::size_t b = a + 1; b < teams; ++b) {
        if (wilcoxon_signed_rank(columns[a], columns[b], options.wilcoxon).p_value < options.p_threshold) ++points[a];
        if (wilcoxon_signed_rank(columns[b], columns[a], options.wilcoxon).p_value < options.p_threshold) ++points[b];
      }
    }
  }
  return points;
}

std::vector<std::size_t> points_round(const MetricSamples& samples, const RankingOptions& options) {
  std::vector<std::size_t> all(samples.scan_count());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return points_round(samples, all, options);
}

RankingResult bootstrap_rank(const MetricSamples& samples, const RankingOptions& options) {
  samples.validate();
  const std::size_t teams = samples.team_count();
  const std::size_t scans = samples.scan_count();
  if (teams < 2) throw ValidationError("ranking needs at least two teams");
  if (options.iterations < 1) throw ValidationError("bootstrap needs at least one iteration");
  if (!(options.drop_fraction >= 0.0 && options.drop_fraction < 1.0)) {
    throw ValidationError("drop fraction must lie in [0, 1)");
  }
  if (!(options.p_threshold > 0.0 && options.p_threshold < 1.0)) {
    throw ValidationError("p threshold must lie in (0, 1)");
  }
  const auto drop = static_cast<std::size_t>(std::floor(options.drop_fraction * static_cast<double>(scans)));
  if (options.mode == BootstrapMode::DropSubset && scans - std::min(drop, scans) < 2) {
    throw ValidationError("bootstrap subset would keep fewer than two scans");
  }
  if (options.mode == BootstrapMode::ResampleWithReplacement && scans < 2) {
    throw ValidationError("bootstrap needs at least two scans");
  }

  RankingResult result;
  result.teams = samples.teams;
  result.streams = samples.streams;
  result.comparisons_per_team = (teams - 1) * samples.stream_count();
  result.points.resize(options.iterations);
  result.normalized.resize(options.iterations);

  parallel_for(options.iterations, options.workers, [&](std::size_t it) {
    Rng rng(derive_seed(options.seed, it));
    std::vector<std::size_t> subset;
    if (options.mode == BootstrapMode::DropSubset) {
      std::vector<std::size_t> perm(scans);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      // Partial Fisher-Yates: the first `drop` slots are the removed scans.
      for (std::size_t i = 0; i < drop; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(scans - i));
        std::swap(perm[i], perm[j]);
      }
      subset.assign(perm.begin() + static_cast<std::ptrdiff_t>(drop), perm.end());
      std::sort(subset.begin(), subset.end());
    } else {
      subset.resize(scans);
      for (auto& s : subset) s = static_cast<std::size_t>(rng.below(scans));
      std::sort(subset.begin(), subset.end());
    }
    result.points[it] = points_round(samples, subset, options);
    result.normalized[it].resize(teams);
    for (std::size_t t = 0; t < teams; ++t) {
      result.normalized[it][t] =
          static_cast<double>(result.points[it][t]) / static_cast<double>(result.comparisons_per_team);
    }
  });

  result.rank_score.assign(teams, 0.0);
  for (std::size_t it = 0; it < options.iterations; ++it) {
    for (std::size_t t = 0; t < teams; ++t) result.rank_score[t] += result.normalized[it][t];
  }
  for (auto& s : result.rank_score) s /= static_cast<double>(options.iterations);

  result.pvalues.assign(samples.stream_count(), std::vector<std::vector<double>>(teams, std::vector<double>(teams, 1.0)));
  for (std::size_t st = 0; st < samples.stream_count(); ++st) {
    for (std::size_t a = 0; a < teams; ++a) {
      for (std::size_t b = 0; b < teams; ++b) {
        if (a == b) continue;
        result.pvalues[st][a][b] =
            wilcoxon_signed_rank(samples.values[a][st], samples.values[b][st], options.wilcoxon).p_value;
      }
    }
  }

  result.order.resize(teams);
  std::iota(result.order.begin(), result.order.end(), std::size_t{0});
  std::stable_sort(result.order.begin(), result.order.end(), [&](std::size_t a, std::size_t b) {
    if (result.rank_score[a] != result.rank_score[b]) return result.rank_score[a] > result.rank_score[b];
    return result.teams[a] < result.teams[b];
  });
  return result;
}

std::vector<LeaderboardEntry> leaderboard(const RankingResult& result, std::span<const MetricReport> reports) {
  if (reports.size() != result.teams.size()) throw ValidationError("one report per team required");
  std::vector<LeaderboardEntry> out;
  for (std::size_t t : result.order) {
    out.push_back({result.teams[t], result.rank_score[t], reports[t].map, reports[t].mar});
  }
  std::stable_sort(out.begin(), out.end(), [](const LeaderboardEntry& a, const LeaderboardEntry& b) {
    if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
    if (a.map != b.map) return a.map > b.map;
    if (a.mar != b.mar) return a.mar > b.mar;
    return a.team < b.team;
  });
  return out;
}

std::string leaderboard_csv(std::span<const LeaderboardEntry> entries) {
  std::ostringstream out;
  out << "rank,team,rank_score,mAP,mAR\r\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    out << (i + 1) << ',' << csv_escape(e.team) << ',' << format_double(e.rank_score) << ','
        << format_double(e.map) << ',' << format_double(e.mar) << "\r\n";
  }
  return out.str();
}

nlohmann::ordered_json leaderboard_json(std::span<const LeaderboardEntry> entries, const RankingResult& result) {
  using json = nlohmann::ordered_json;
  json root = json::object();
  root["comparisons_per_team"] = result.comparisons_per_team;
  root["iterations"] = result.points.size();
  root["streams"] = result.streams;
  json rows = json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    rows.push_back(json{{"rank", i + 1},
                        {"team", entries[i].team},
                        {"rank_score", entries[i].rank_score},
                        {"mAP", entries[i].map},
                        {"mAR", entries[i].mar}});
  }
  root["leaderboard"] = std::move(rows);
  return root;
}

std::string pvalues_csv(const RankingResult& result) {
  std::ostringstream out;
  out << "stream,team,opponent,p_value\r\n";
  for (std::size_t st = 0; st < result.streams.size(); ++st) {
    for (std::size_t a = 0; a < result.teams.size(); ++a) {
      for (std::size_t b = 0; b < result.teams.size(); ++b) {
        if (a == b) continue;
        out << csv_escape(result.streams[st]) << ',' << csv_escape(result.teams[a]) << ','
            << csv_escape(result.teams[b]) << ',' << format_double(result.pvalues[st][a][b]) << "\r\n";
      }
    }
  }
  return out.str();
}

std::string points_csv(const RankingResult& result) {
  std::ostringstream out;
  out << "iteration,team,points,normalized\r\n";
  for (std::size_t it = 0; it < result.points.size(); ++it) {
    for (std::size_t t = 0; t < result.teams.size(); ++t) {
      out << it << ',' << csv_escape(result.teams[t]) << ',' << result.points[it][t] << ','
          << format_double(result.normalized[it][t]) << "\r\n";
    }
  }
  return out.str();
}

}  // namespace tland
