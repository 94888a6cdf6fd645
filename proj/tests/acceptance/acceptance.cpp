// Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "meshes.hpp"
#include "oracles.hpp"
#include "tland/geometry.hpp"
#include "tland/matching.hpp"
#include "tland/metrics.hpp"
#include "tland/postprocess.hpp"
#include "tland/ranking.hpp"
#include "tland/rng.hpp"
#include "tland/synth.hpp"

using namespace tland;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Clock {
 public:
  Clock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::vector<LandmarkFile> arch_set(std::size_t n, std::uint64_t seed, std::size_t teeth = 14) {
  std::vector<LandmarkFile> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    ArchSpec spec;
    spec.tooth_count = teeth;
    spec.scan_id = "scan" + std::to_string(i);
    out[i] = generate_arch(spec, derive_seed(seed, i)).ground_truth;
  }
  return out;
}

// 1
Outcome perfect_identity() {
  Clock clock;
  const auto gt = arch_set(20, 1);
  std::vector<LandmarkFile> preds;
  Rng rng(2);
  for (const auto& g : gt) {
    std::vector<Prediction> p;
    for (const auto& l : g.landmarks()) p.push_back({l, rng.uniform()});
    preds.push_back(LandmarkFile::from_predictions(g.scan_id, p));
  }
  const MetricReport r = evaluate_submission(gt, preds);
  const double t = clock.seconds();
  Outcome o;
  double worst = 0.0;
  for (const auto& c : r.categories) worst = std::max({worst, std::abs(c.map - 1.0), std::abs(c.mar - 1.0)});
  o.pass = worst <= 1e-12 && t < 5.0;
  o.detail = "max |1 - m| = " + fmt("%.3g", worst) + " over 4 categories x {mAP, mAR}, " + fmt("%.2f", t) + " s";
  return o;
}

// 2
Outcome matching_oracle() {
  Rng rng(20240);
  std::size_t mismatches = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const auto n = rng.below(51);
    const auto m = rng.below(51);
    const int mode = iter % 4;  // continuous, lattice (distance ties), score ties, both
    const bool lattice = mode == 1 || mode == 3;
    const bool tied = mode >= 2;
    auto coord = [&] { return lattice ? std::round(rng.uniform(0, 5)) : rng.uniform(0, 30); };
    std::vector<Landmark> refs;
    std::vector<Prediction> preds;
    for (std::uint64_t j = 0; j < m; ++j) refs.push_back({"r", LandmarkClass::Cusp, Vec3(coord(), coord(), coord())});
    for (std::uint64_t i = 0; i < n; ++i) {
      const double score = tied ? std::round(rng.uniform(0, 4)) / 4.0 : rng.uniform();
      preds.push_back({{"p", LandmarkClass::Cusp, Vec3(coord(), coord(), coord())}, score});
    }
    if (!(assign(preds, refs, Category::Cusps) == oracle::assign_bruteforce(preds, refs, Category::Cusps))) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1000 instances (n, m <= 50)"};
}

// 3
Outcome ap_hand_case() {
  const double ap = average_precision({true, false, true}, 2);
  const double err = std::abs(ap - 5.0 / 6.0);
  return {err <= 1e-12, "AP = " + fmt("%.15f", ap) + ", |AP - 5/6| = " + fmt("%.3g", err)};
}

// 4
Outcome ar_closed_form() {
  const std::vector<Landmark> refs = {{"r", LandmarkClass::Cusp, Vec3(2, -1, 7)}};
  const std::vector<Prediction> preds = {{{"p", LandmarkClass::Cusp, Vec3(3, -1, 7)}, 0.8}};
  const double ar = average_recall(assign(preds, refs, Category::Cusps), ThresholdGrid::standard());
  const double closed = (std::exp(-1.0) - std::exp(-3.0)) / (1.0 - std::exp(-3.0));
  const double err = std::abs(ar - closed);
  return {err <= 0.02, "trapezoid " + fmt("%.5f", ar) + " vs closed form " + fmt("%.5f", closed) + ", diff " + fmt("%.4f", err)};
}

// 5
Outcome wilcoxon_exactness() {
  const std::vector<double> d = {1, 2, 3, 4, 5};
  const std::vector<double> zero(5, 0.0);
  const double p = wilcoxon_signed_rank(d, zero).p_value;
  Rng rng(555);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto n = 20 + rng.below(6);
    std::vector<double> x;
    std::vector<double> y;
    const double shift = rng.uniform(-0.6, 0.9);
    for (std::uint64_t k = 0; k < n; ++k) {
      x.push_back(rng.normal(shift, 1.0));
      y.push_back(rng.normal(0.0, 1.0));
    }
    WilcoxonOptions e;
    e.method = PValueMethod::Exact;
    WilcoxonOptions a;
    a.method = PValueMethod::Normal;
    worst = std::max(worst, std::abs(wilcoxon_signed_rank(x, y, e).p_value - wilcoxon_signed_rank(x, y, a).p_value));
  }
  return {p == 0.03125 && worst < 0.01,
          "p([1..5]) = " + fmt("%.17g", p) + "; max |exact - normal| = " + fmt("%.5f", worst) + " over 200 cases"};
}

MetricSamples dominance_samples(std::size_t scans, std::uint64_t seed) {
  MetricSamples s;
  s.teams = {"A", "B", "C"};
  s.streams = {"1", "2", "3", "4", "5", "6", "7", "8"};
  for (std::size_t i = 0; i < scans; ++i) s.scan_ids.push_back(std::to_string(i));
  Rng rng(seed);
  s.values.assign(3, std::vector<std::vector<double>>(8, std::vector<double>(scans)));
  for (std::size_t k = 0; k < 8; ++k) {
    for (std::size_t i = 0; i < scans; ++i) {
      const double base = rng.uniform(0.3, 0.6);
      s.values[0][k][i] = base + 0.2 + rng.uniform(0.01, 0.1);
      s.values[1][k][i] = base + 0.1;
      s.values[2][k][i] = base - rng.uniform(0.01, 0.1);
    }
  }
  return s;
}

// 6
Outcome ranking_dominance() {
  const MetricSamples s = dominance_samples(30, 6);
  bool exact = true;
  double slowest = 0.0;
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL, 99ULL, 0xdeadbeefULL}) {
    RankingOptions o;
    o.seed = seed;
    Clock clock;
    const RankingResult r = bootstrap_rank(s, o);
    slowest = std::max(slowest, clock.seconds());
    exact = exact && r.rank_score == std::vector<double>{1.0, 0.5, 0.0};
  }
  return {exact && slowest < 10.0, std::string(exact ? "scores exactly 1.0/0.5/0.0" : "scores differ") +
                                       " for 5 seeds; slowest run (100 it, 30 scans, 3 teams) " + fmt("%.3f", slowest) +
                                       " s"};
}

// 7
Outcome degradation_monotonicity() {
  const std::vector<double> sigmas = {0.1, 0.5, 1.0};
  const auto gt = arch_set(50, 7);
  std::vector<MetricReport> reports;
  for (std::size_t t = 0; t < sigmas.size(); ++t) {
    std::vector<LandmarkFile> preds;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      NoiseSpec n;
      n.sigma = sigmas[t];
      preds.push_back(perturb(gt[i], n, derive_seed(derive_seed(70, t), i)));
    }
    reports.push_back(evaluate_submission(gt, preds));
  }
  const std::vector<std::string> names = {"s0.1", "s0.5", "s1.0"};
  RankingOptions o;
  o.seed = 7;
  const RankingResult r = bootstrap_rank(build_metric_samples(names, reports), o);
  const double g1 = r.rank_score[0] - r.rank_score[1];
  const double g2 = r.rank_score[1] - r.rank_score[2];
  return {g1 > 0.1 && g2 > 0.1, "rank scores " + fmt("%.4f", r.rank_score[0]) + " / " + fmt("%.4f", r.rank_score[1]) +
                                    " / " + fmt("%.4f", r.rank_score[2]) + " for sigma 0.1 / 0.5 / 1.0"};
}

struct Recovery {
  std::size_t missing = 0;
  std::size_t spurious = 0;
  double worst = 0.0;
};

// Matches extracted positions to planted ones; each planted landmark must
// be matched by exactly one extraction within tol.
void score_recovery(const std::vector<Vec3>& planted, const std::vector<Vec3>& found, double tol, Recovery& acc) {
  std::vector<int> hits(planted.size(), 0);
  for (const auto& f : found) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < planted.size(); ++i) {
      const double d = distance(f, planted[i]);
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    if (bd <= tol && hits[best] == 0) {
      hits[best] = 1;
      acc.worst = std::max(acc.worst, bd);
    } else {
      ++acc.spurious;
    }
  }
  for (int h : hits) acc.missing += h == 0;
}

std::vector<Vec3> positions(const std::vector<Prediction>& p) {
  std::vector<Vec3> out;
  for (const auto& x : p) out.push_back(x.landmark.position);
  return out;
}

// Field radius and procedure parameters are sized so every planted blob is
// one cluster / one graph component and distinct blobs never touch: same
// class landmarks on the synthetic arches are at least ~2.4 mm apart.
constexpr double kFieldRadius = 0.6;

std::array<std::vector<Vec3>, 5> extract_all(const PointField& with_offsets, const PointField& without_offsets) {
  std::array<std::vector<Vec3>, 5> out;
  WeightedDbscanParams wd;
  wd.eps = 0.5;
  out[0] = positions(weighted_dbscan_extract(with_offsets, wd));
  out[1] = positions(confidence_nms(without_offsets, 0.5, 1.0));
  out[2] = positions(density_cluster_peak(without_offsets, 0.7, 0.8));
  GaussianVoteParams gv;
  gv.eps = 0.5;
  out[3] = positions(gaussian_vote_extract(with_offsets, gv));
  const MeshGraph g = MeshGraph::radius_graph(without_offsets.points, 0.7);
  const CtdNmsResult c = ctd_nms(g, without_offsets.distance, 0.3, 100, without_offsets.points);
  for (std::size_t v : c.landmarks) out[4].push_back(without_offsets.points[v]);
  return out;
}

// 8
Outcome postprocess_recovery() {
  const char* names[5] = {"weighted_dbscan", "confidence_nms", "density_peak", "gaussian_vote", "ctd_nms"};
  std::array<Recovery, 5> clean{};
  std::array<Recovery, 5> noisy{};
  std::size_t planted_total = 0;

  std::vector<LandmarkFile> fixtures = arch_set(3, 8);
  // Plus random well-separated sets.
  Rng rng(88);
  for (int f = 0; f < 3; ++f) {
    std::vector<Landmark> ls;
    while (ls.size() < 12) {
      const Vec3 p(rng.uniform(0, 40), rng.uniform(0, 40), rng.uniform(0, 10));
      bool ok = true;
      for (const auto& l : ls) ok = ok && distance(l.position, p) >= 6.0;
      if (ok) ls.push_back({"r" + std::to_string(ls.size()), LandmarkClass::Cusp, p});
    }
    fixtures.push_back(LandmarkFile::from_landmarks("random" + std::to_string(f), ls));
  }

  std::uint64_t seed = 800;
  for (const auto& gt : fixtures) {
    for (LandmarkClass cls : kAllClasses) {
      std::vector<Vec3> planted;
      for (const auto& o : gt.objects) {
        if (o.landmark.cls == cls) planted.push_back(o.landmark.position);
      }
      if (planted.empty()) continue;
      planted_total += planted.size();
      for (double sigma : {0.0, 0.1}) {
        PlantSpec ps;
        ps.landmark_class = cls;
        ps.radius = kFieldRadius;
        ps.noise_sigma = sigma;
        const PointField with = plant_field(gt, ps, ++seed);
        PointField without = with;
        without.offset.clear();
        const auto found = extract_all(with, without);
        for (std::size_t k = 0; k < 5; ++k) {
          score_recovery(planted, found[k], sigma == 0.0 ? 1e-6 : 0.3, sigma == 0.0 ? clean[k] : noisy[k]);
        }
      }
    }
  }
  Outcome o;
  std::ostringstream d;
  d << planted_total << " planted;";
  for (std::size_t k = 0; k < 5; ++k) {
    const bool ok = clean[k].missing == 0 && clean[k].spurious == 0 && noisy[k].missing == 0 && noisy[k].spurious == 0;
    o.pass = o.pass && ok;
    d << ' ' << names[k] << " err " << fmt("%.1e", clean[k].worst) << '/' << fmt("%.3f", noisy[k].worst);
    if (!ok) {
      d << " (missing " << clean[k].missing << '+' << noisy[k].missing << ", spurious " << clean[k].spurious << '+'
        << noisy[k].spurious << ')';
    }
    d << (k < 4 ? "," : "");
  }
  o.detail = d.str();
  return o;
}

double min_pairwise(std::span<const Vec3> pts, const std::vector<std::size_t>& idx) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) best = std::min(best, distance(pts[idx[a]], pts[idx[b]]));
  }
  return best;
}

// 9
Outcome geometry_sanity() {
  const double r = 5.0;
  const CurvatureField hs = mean_curvature(testmesh::icosphere(4, r));
  double sphere_err = 0.0;
  for (double v : hs.values) sphere_err = std::max(sphere_err, std::abs(v * r - 1.0));
  const CurvatureField hp = mean_curvature(testmesh::plane_grid(16, 0.4));
  double plane = 0.0;
  for (double v : hp.values) plane = std::max(plane, std::abs(v));

  Rng rng(9);
  int wins = 0;
  bool deterministic = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 500; ++i) pts.emplace_back(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10));
    const auto a = fps(pts, 32, static_cast<std::uint64_t>(trial));
    deterministic = deterministic && a == fps(pts, 32, static_cast<std::uint64_t>(trial));
    std::vector<std::size_t> perm(pts.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = 0; i < 32; ++i) std::swap(perm[i], perm[i + rng.below(perm.size() - i)]);
    perm.resize(32);
    wins += min_pairwise(pts, a) >= min_pairwise(pts, perm);
  }
  const bool ok = sphere_err < 0.1 && plane < 1e-6 && deterministic && wins >= 95;
  return {ok, "sphere max rel err " + fmt("%.4f", sphere_err) + ", plane max |H| " + fmt("%.2g", plane) +
                  ", fps " + (deterministic ? "deterministic" : "NOT deterministic") + ", beats random in " +
                  std::to_string(wins) + "/100"};
}

// 10
Outcome pipeline_closure() {
  Clock clock;
  const fs::path root = fs::temp_directory_path() / "tland_acceptance_pipeline";
  fs::remove_all(root);
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return cli::run_cli(args, sink, sink); };
  const std::string fx = (root / "fx").string();
  Outcome o;
  if (run({"synth", "--out", fx, "--scans", "10", "--seed", "10", "--team", "sharp:0.2:0.02:1", "--team",
           "blurry:0.8:0.1:3"}) != 0 ||
      run({"detect", "--meshes", fx + "/meshes", "--out", (root / "det").string()}) != 0 ||
      run({"eval", "--gt", fx + "/gt", "--pred", (root / "det" / "predictions").string(), "--out",
           (root / "eval").string()}) != 0 ||
      run({"rank", "--gt", fx + "/gt", "--team", fx + "/teams/sharp", "--team", fx + "/teams/blurry", "--team",
           (root / "det" / "predictions").string(), "--name", "sharp", "--name", "blurry", "--name", "baseline",
           "--out", (root / "rank").string()}) != 0) {
    return {false, "a pipeline stage failed: " + sink.str()};
  }
  const double t = clock.seconds();

  // Leaderboard validity.
  const auto lb = nlohmann::json::parse(read_text_file(root / "rank" / "leaderboard.json"));
  bool valid = lb["leaderboard"].size() == 3;
  for (const auto& e : lb["leaderboard"]) {
    const double s = e["rank_score"].get<double>();
    valid = valid && s >= 0.0 && s <= 1.0;
  }

  // Pooled baseline cusp recall at 1.5 mm.
  std::size_t tp = 0;
  std::size_t refs = 0;
  for (const auto& p : list_json_files(root / "fx" / "gt")) {
    const LandmarkFile gt = read_ground_truth_file(p);
    const LandmarkFile det = read_predictions_file(root / "det" / "predictions" / p.filename());
    const auto gl = gt.landmarks();
    const auto dl = det.predictions();
    const MatchTable table = assign(select_category(dl, Category::Cusps), select_category(gl, Category::Cusps), Category::Cusps);
    tp += hits(table, HitThreshold(1.5)).true_positives;
    refs += table.reference_count;
  }
  const double recall = refs ? static_cast<double>(tp) / static_cast<double>(refs) : 0.0;
  o.pass = valid && t < 60.0 && recall >= 0.8;
  o.detail = std::string(valid ? "valid" : "INVALID") + " 3-team leaderboard, baseline cusp recall@1.5mm " +
             fmt("%.3f", recall) + " (" + std::to_string(tp) + "/" + std::to_string(refs) + "), " + fmt("%.2f", t) + " s";
  fs::remove_all(root);
  return o;
}

std::string random_key(Rng& rng) {
  static const char* pieces[] = {"a", "Z", "7", "_", "-", " ", "\"", "\\", "/", "\t", "\xc3\xa9", "\xe6\xbc\xa2", "{", ","};
  std::string k;
  const auto len = 1 + rng.below(8);
  for (std::uint64_t i = 0; i < len; ++i) k += pieces[rng.below(std::size(pieces))];
  return k;
}

double random_coordinate(Rng& rng) {
  switch (rng.below(6)) {
    case 0: return 0.0;
    case 1: return -0.0;
    case 2: return rng.normal(0, 1e3);
    case 3: return std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.below(2000)) - 1000);
    case 4: return std::nextafter(rng.uniform(-50, 50), 0.0);
    default: return std::round(rng.uniform(-100, 100));
  }
}

// 11
Outcome format_round_trip() {
  Rng rng(1111);
  std::size_t failures = 0;
  for (int i = 0; i < 500; ++i) {
    LandmarkFile f;
    f.version = rng.below(2) ? "1.1" : "2.0-" + std::to_string(i);
    f.scan_id = random_key(rng) + std::to_string(i);
    const bool scored = i % 2 == 1;
    const auto n = rng.below(40);
    for (std::uint64_t k = 0; k < n; ++k) {
      LandmarkFile::Object o;
      o.landmark.key = random_key(rng) + "#" + std::to_string(k);
      o.landmark.cls = kAllClasses[rng.below(6)];
      o.landmark.position = Vec3(random_coordinate(rng), random_coordinate(rng), random_coordinate(rng));
      if (scored) o.score = rng.below(5) == 0 ? std::round(rng.uniform()) : rng.uniform();
      f.objects.push_back(o);
    }
    if (rng.below(2)) {
      f.extra["site"] = random_key(rng);
      f.extra["meta"] = {{"jaw", rng.below(2) ? "upper" : "lower"}, {"n", rng.below(1000)}, {"ok", true}};
      f.extra["list"] = nlohmann::ordered_json::array({1.5, "x", nullptr});
    }
    try {
      const std::string text = write_landmark_file(f);
      const LandmarkFile back = scored ? parse_predictions(text) : parse_ground_truth(text);
      if (!(back == f)) ++failures;
    } catch (const std::exception&) {
      ++failures;
    }
  }
  return {failures == 0, std::to_string(500 - failures) + "/500 files equal after write -> parse"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"perfect-detector identity", perfect_identity},
      {"matching oracle equivalence", matching_oracle},
      {"AP hand case", ap_hand_case},
      {"AR closed form", ar_closed_form},
      {"Wilcoxon exactness", wilcoxon_exactness},
      {"ranking dominance", ranking_dominance},
      {"degradation monotonicity", degradation_monotonicity},
      {"post-processing recovery", postprocess_recovery},
      {"geometry sanity", geometry_sanity},
      {"end-to-end pipeline closure", pipeline_closure},
      {"format round-trip", format_round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
