#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tland/metrics.hpp"

namespace tland {

enum class ZeroMethod {
  Wilcox,  // drop zero differences before ranking
  Pratt,   // rank zeros with the rest, then drop their ranks
};

enum class PValueMethod {
  Auto,    // exact up to exact_max_n nonzero pairs, normal beyond
  Exact,
  Normal,  // tie-corrected, continuity-corrected
};

struct WilcoxonOptions {
  ZeroMethod zero_method = ZeroMethod::Wilcox;
  PValueMethod method = PValueMethod::Auto;
  std::size_t exact_max_n = 25;
};

struct WilcoxonResult {
  double w_minus = 0.0;  // sum of ranks of negative differences x - y
  double w_plus = 0.0;
  double p_value = 1.0;  // one-sided, alternative: x stochastically greater than y
  std::size_t n_nonzero = 0;
  bool exact = false;
  bool no_evidence = false;  // every difference was zero
};

// Paired one-sided signed-rank test of x > y. Ties get average ranks; the
// exact null distribution conditions on the observed tie pattern.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    const WilcoxonOptions& options = {});

/// Per-scan metric values of several teams.
///
/// values[team][stream][scan]; all teams share the scan order.
struct MetricSamples {
  std::vector<std::string> teams;
  std::vector<std::string> streams;
  std::vector<std::string> scan_ids;
  std::vector<std::vector<std::vector<double>>> values;

  std::size_t team_count() const { return teams.size(); }
  std::size_t stream_count() const { return streams.size(); }
  std::size_t scan_count() const { return scan_ids.size(); }

  // Throws ValidationError on shape mismatch or non-finite values.
  void validate() const;
};

enum class StreamSelection {
  PerCategory,  // AP and AR for each of the four categories: 8 streams
  Grand,        // per-scan mean AP and mean AR over categories: 2 streams
};

// Reports must cover the same scans (as produced from one ground-truth set).
MetricSamples build_metric_samples(std::span<const std::string> teams,
                                   std::span<const MetricReport> reports,
                                   StreamSelection selection = StreamSelection::PerCategory);

enum class BootstrapMode {
  DropSubset,               // remove floor(drop_fraction * S) scans, keep the rest
  ResampleWithReplacement,  // draw S scans with replacement
};

struct RankingOptions {
  std::size_t iterations = 100;
  double drop_fraction = 0.10;
  std::uint64_t seed = 0;
  double p_threshold = 0.001;
  BootstrapMode mode = BootstrapMode::DropSubset;
  WilcoxonOptions wilcoxon;
  unsigned workers = 1;
};

// Points per team on the given scan indices (repeats allowed). A team earns
// one point per (opponent, stream) where the one-sided test in its favour
// has p < p_threshold. Throws ValidationError with fewer than two teams.
std::vector<std::size_t> points_round(const MetricSamples& samples, std::span<const std::size_t> scans,
                                      const RankingOptions& options = {});
std::vector<std::size_t> points_round(const MetricSamples& samples, const RankingOptions& options = {});

struct RankingResult {
  std::vector<std::string> teams;
  std::vector<std::string> streams;
  std::size_t comparisons_per_team = 0;  // (T - 1) * streams
  std::vector<std::vector<std::size_t>> points;  // [iteration][team]
  std::vector<std::vector<double>> normalized;   // [iteration][team]
  std::vector<double> rank_score;                // mean of normalized over iterations
  // Full-data one-sided p-values: pvalues[stream][i][j] tests team i > team j.
  std::vector<std::vector<std::vector<double>>> pvalues;
  std::vector<std::size_t> order;  // team indices, best first

  bool operator==(const RankingResult&) const = default;
};

/// Bootstrap point ranking. Iteration k draws its scan subset from a
/// generator seeded with derive_seed(seed, k), so results are identical for
/// any worker count. Throws ValidationError when a subset would keep fewer
/// than two scans.
RankingResult bootstrap_rank(const MetricSamples& samples, const RankingOptions& options = {});

struct LeaderboardEntry {
  std::string team;
  double rank_score = 0.0;
  double map = 0.0;
  double mar = 0.0;
};

// Ordered by rank score (best first), ties by mAP, then mAR, then name.
// Reports are indexed like result.teams.
std::vector<LeaderboardEntry> leaderboard(const RankingResult& result, std::span<const MetricReport> reports);
std::string leaderboard_csv(std::span<const LeaderboardEntry> entries);
nlohmann::ordered_json leaderboard_json(std::span<const LeaderboardEntry> entries, const RankingResult& result);
// stream,team,opponent,p_value
std::string pvalues_csv(const RankingResult& result);
// iteration,team,points,normalized
std::string points_csv(const RankingResult& result);

}  // namespace tland
