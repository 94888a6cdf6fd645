#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tland/ranking.hpp"
#include "tland/rng.hpp"

using namespace tland;

namespace {

WilcoxonResult test_diffs(const std::vector<double>& d, WilcoxonOptions opts = {}) {
  const std::vector<double> zero(d.size(), 0.0);
  return wilcoxon_signed_rank(d, zero, opts);
}

// Team t scores base - t * gap on every scan and stream, so team 0 dominates.
MetricSamples chain(std::size_t teams, std::size_t scans, std::size_t streams = 8, double gap = 0.1) {
  MetricSamples s;
  Rng rng(99);
  for (std::size_t t = 0; t < teams; ++t) s.teams.push_back("team" + std::to_string(t));
  for (std::size_t k = 0; k < streams; ++k) s.streams.push_back("stream" + std::to_string(k));
  for (std::size_t i = 0; i < scans; ++i) s.scan_ids.push_back("scan" + std::to_string(i));
  std::vector<std::vector<double>> base(streams, std::vector<double>(scans));
  for (auto& row : base) {
    for (auto& v : row) v = rng.uniform(0.5, 0.9);
  }
  s.values.assign(teams, std::vector<std::vector<double>>(streams, std::vector<double>(scans)));
  for (std::size_t t = 0; t < teams; ++t) {
    for (std::size_t k = 0; k < streams; ++k) {
      for (std::size_t i = 0; i < scans; ++i) s.values[t][k][i] = base[k][i] - gap * static_cast<double>(t);
    }
  }
  return s;
}

}  // namespace

TEST_CASE("wilcoxon hand cases") {
  const WilcoxonResult r = test_diffs({1, 2, 3, 4, 5});
  CHECK(r.w_minus == 0.0);
  CHECK(r.w_plus == 15.0);
  CHECK(r.exact);
  CHECK(r.p_value == 0.03125);

  const WilcoxonResult two = test_diffs({5, -1});
  CHECK(two.w_minus == 1.0);
  CHECK(two.p_value == 0.5);

  const std::vector<double> x = {0.3, 0.4, 0.5};
  const WilcoxonResult same = wilcoxon_signed_rank(x, x);
  CHECK(same.no_evidence);
  CHECK(same.p_value == 1.0);

  const std::vector<double> shorter = {0.1};
  CHECK_THROWS_AS(wilcoxon_signed_rank(x, shorter), ValidationError);
}

TEST_CASE("exact p matches full enumeration, ties and zeros included") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const auto n = 1 + rng.below(14);
    std::vector<double> d;
    for (std::uint64_t k = 0; k < n; ++k) d.push_back(std::round(rng.uniform(-4, 4)));
    WilcoxonOptions exact;
    exact.method = PValueMethod::Exact;
    const WilcoxonResult r = test_diffs(d, exact);
    CHECK(r.p_value == doctest::Approx(oracle::wilcoxon_enumerate(d)).epsilon(1e-12));
  }
}

TEST_CASE("normal approximation tracks the exact p for 20 <= n <= 25") {
  Rng rng(23);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto n = 20 + rng.below(6);
    std::vector<double> d;
    const double shift = rng.uniform(-0.5, 0.8);
    for (std::uint64_t k = 0; k < n; ++k) d.push_back(rng.normal(shift, 1.0));
    WilcoxonOptions e;
    e.method = PValueMethod::Exact;
    WilcoxonOptions a;
    a.method = PValueMethod::Normal;
    worst = std::max(worst, std::abs(test_diffs(d, e).p_value - test_diffs(d, a).p_value));
  }
  CHECK(worst < 0.01);
}

TEST_CASE("pratt keeps zeros in the ranking") {
  WilcoxonOptions pratt;
  pratt.zero_method = ZeroMethod::Pratt;
  const WilcoxonResult r = test_diffs({0, 1, 2}, pratt);
  CHECK(r.w_plus == 5.0);  // ranks 2 and 3
  CHECK(r.n_nonzero == 2);
  const WilcoxonResult w = test_diffs({0, 1, 2});
  CHECK(w.w_plus == 3.0);
}

TEST_CASE("points round on dominance chains") {
  const MetricSamples two = chain(2, 30);
  CHECK(points_round(two) == std::vector<std::size_t>{8, 0});
  const MetricSamples three = chain(3, 30);
  CHECK(points_round(three) == std::vector<std::size_t>{16, 8, 0});
  const MetricSamples same = chain(2, 30, 8, 0.0);
  CHECK(points_round(same) == std::vector<std::size_t>{0, 0});
  const MetricSamples one = chain(1, 30);
  CHECK_THROWS_AS(points_round(one), ValidationError);
}

TEST_CASE("bootstrap dominance gives 1, 0.5, 0 for any seed") {
  const MetricSamples s = chain(3, 30);
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 123456789ULL}) {
    RankingOptions o;
    o.seed = seed;
    const RankingResult r = bootstrap_rank(s, o);
    CHECK(r.rank_score == std::vector<double>{1.0, 0.5, 0.0});
    CHECK(r.order == std::vector<std::size_t>{0, 1, 2});
    CHECK(r.comparisons_per_team == 16);
    o.mode = BootstrapMode::ResampleWithReplacement;
    CHECK(bootstrap_rank(s, o).rank_score == std::vector<double>{1.0, 0.5, 0.0});
  }
}

TEST_CASE("degenerate bootstrap equals the full-data round") {
  const MetricSamples s = chain(3, 12, 8, 0.01);
  RankingOptions o;
  o.iterations = 1;
  o.drop_fraction = 0.0;
  o.p_threshold = 0.01;
  const RankingResult r = bootstrap_rank(s, o);
  const auto pts = points_round(s, o);
  for (std::size_t t = 0; t < 3; ++t) CHECK(r.rank_score[t] == static_cast<double>(pts[t]) / 16.0);
}

TEST_CASE("determinism, worker independence and scale invariance") {
  MetricSamples s = chain(4, 25, 8, 0.0);
  Rng rng(5);
  for (auto& team : s.values) {
    for (auto& stream : team) {
      for (auto& v : stream) v += rng.normal(0, 0.05);
    }
  }
  RankingOptions o;
  o.seed = 77;
  o.iterations = 30;
  o.p_threshold = 0.05;
  const RankingResult a = bootstrap_rank(s, o);
  o.workers = 3;
  const RankingResult b = bootstrap_rank(s, o);
  CHECK(a == b);
  CHECK(pvalues_csv(a) == pvalues_csv(b));

  MetricSamples scaled = s;
  for (auto& team : scaled.values) {
    for (auto& v : team[2]) v *= 3.0;
  }
  CHECK(bootstrap_rank(scaled, o) == a);
  for (const auto& it : a.normalized) {
    for (double v : it) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("too few scans after dropping") {
  const MetricSamples s = chain(2, 2);
  RankingOptions o;
  o.drop_fraction = 0.5;
  CHECK_THROWS_AS(bootstrap_rank(s, o), ValidationError);
}

TEST_CASE("leaderboard output") {
  const MetricSamples s = chain(3, 30);
  const RankingResult r = bootstrap_rank(s, {});
  std::vector<MetricReport> reports(3);
  reports[0].map = 0.9;
  reports[1].map = 0.8;
  reports[2].map = 0.7;
  const auto lb = leaderboard(r, reports);
  REQUIRE(lb.size() == 3);
  CHECK(lb[0].team == "team0");
  CHECK(lb[0].map == 0.9);
  const std::string csv = leaderboard_csv(lb);
  CHECK(csv.rfind("rank,team,rank_score,mAP,mAR\r\n", 0) == 0);
  CHECK(points_csv(r).find("iteration,team,points,normalized") == 0);
}
