#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "tland/metrics.hpp"
#include "tland/report.hpp"
#include "tland/rng.hpp"
#include "tland/synth.hpp"

using namespace tland;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run tland_run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tland_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

nlohmann::json summary(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "summary.json")); }

}  // namespace

TEST_CASE("help and bad usage") {
  CHECK(tland_run({"--help"}).code == 0);
  CHECK(tland_run({}).code == 2);
  CHECK(tland_run({"frobnicate"}).code == 2);
  CHECK(tland_run({"eval", "--no-such-flag"}).code == 2);
}

TEST_CASE("synth, eval identity and empty predictions") {
  const fs::path root = scratch("identity");
  const std::string fx = (root / "fx").string();
  REQUIRE(tland_run({"synth", "--out", fx, "--scans", "5", "--seed", "3", "--team", "perfect:0"}).code == 0);
  std::size_t n = 0;
  for (const auto& p : list_json_files(root / "fx" / "gt")) {
    CHECK_NOTHROW(read_ground_truth_file(p));
    ++n;
  }
  CHECK(n == 5);
  std::size_t meshes = 0;
  for (const auto& e : fs::directory_iterator(root / "fx" / "meshes")) {
    CHECK(load_mesh(e.path()).mesh.faces.size() > 0);
    ++meshes;
  }
  CHECK(meshes == 5);
  CHECK(fs::exists(root / "fx" / "config.json"));

  const Run r = tland_run({"eval", "--gt", fx + "/gt", "--pred", fx + "/teams/perfect", "--out", (root / "ev").string()});
  REQUIRE(r.code == 0);
  const auto s = summary(root / "ev");
  for (const auto& [name, cat] : s["categories"].items()) {
    CHECK(cat["mAP"].get<double>() == 1.0);
    CHECK(cat["mAR"].get<double>() == 1.0);
  }

  fs::create_directories(root / "none");
  const Run e = tland_run({"eval", "--gt", fx + "/gt", "--pred", (root / "none").string(), "--out", (root / "ev0").string()});
  CHECK(e.code == 0);
  CHECK(e.err.find("warning") != std::string::npos);
  const auto z = summary(root / "ev0");
  CHECK(z["mAP"].get<double>() == 0.0);
  CHECK(z["mAR"].get<double>() == 0.0);
  CHECK(z["warnings"].size() == 5);
}

TEST_CASE("CLI summary equals the library output byte for byte") {
  const fs::path root = scratch("equiv");
  const std::string fx = (root / "fx").string();
  REQUIRE(tland_run({"synth", "--out", fx, "--scans", "20", "--seed", "11", "--team", "t:0.3:0.05:2"}).code == 0);
  REQUIRE(tland_run({"eval", "--gt", fx + "/gt", "--pred", fx + "/teams/t", "--out", (root / "ev").string()}).code == 0);

  std::vector<LandmarkFile> gt;
  std::vector<LandmarkFile> preds;
  for (const auto& p : list_json_files(root / "fx" / "gt")) gt.push_back(read_ground_truth_file(p));
  for (const auto& p : list_json_files(root / "fx" / "teams" / "t")) preds.push_back(read_predictions_file(p));
  const MetricReport lib = evaluate_submission(gt, preds);
  CHECK(slurp(root / "ev" / "summary.json") == report_summary_json(lib).dump(2) + "\n");
  CHECK(slurp(root / "ev" / "per_scan.csv") == report_csv(lib));
  CHECK(slurp(root / "ev" / "pr_curves.csv") == pr_curves_csv(lib));
}

TEST_CASE("rank orders degraded teams and is deterministic") {
  const fs::path root = scratch("rank");
  const std::string fx = (root / "fx").string();
  REQUIRE(tland_run({"synth", "--out", fx, "--scans", "30", "--seed", "5", "--tooth-count", "8", "--team", "a:0.1",
                     "--team", "b:0.5", "--team", "c:1.0", "--team", "a2:0.1"})
              .code == 0);
  // a2 is a byte copy of a so the two must tie.
  fs::remove_all(root / "fx" / "teams" / "a2");
  fs::copy(root / "fx" / "teams" / "a", root / "fx" / "teams" / "a2");

  auto rank = [&](const std::string& out, std::vector<std::string> teams) {
    std::vector<std::string> args = {"rank", "--gt", fx + "/gt", "--out", out, "--seed", "9", "--iterations", "30"};
    for (const auto& t : teams) {
      args.push_back("--team");
      args.push_back(fx + "/teams/" + t);
    }
    return tland_run(args);
  };
  REQUIRE(rank((root / "r1").string(), {"c", "a", "b"}).code == 0);
  REQUIRE(rank((root / "r2").string(), {"c", "a", "b"}).code == 0);
  CHECK(slurp(root / "r1" / "leaderboard.csv") == slurp(root / "r2" / "leaderboard.csv"));
  CHECK(slurp(root / "r1" / "points.csv") == slurp(root / "r2" / "points.csv"));
  const auto lb = nlohmann::json::parse(slurp(root / "r1" / "leaderboard.json"));
  REQUIRE(lb["leaderboard"].size() == 3);
  CHECK(lb["leaderboard"][0]["team"] == "a");
  CHECK(lb["leaderboard"][1]["team"] == "b");
  CHECK(lb["leaderboard"][2]["team"] == "c");

  REQUIRE(rank((root / "r3").string(), {"a", "a2"}).code == 0);
  const auto tie = nlohmann::json::parse(slurp(root / "r3" / "leaderboard.json"));
  CHECK(tie["leaderboard"][0]["rank_score"] == tie["leaderboard"][1]["rank_score"]);

  const Run one = rank((root / "r4").string(), {"a"});
  CHECK(one.code == 2);
  CHECK(fs::exists(root / "r4" / "errors.json"));
}

TEST_CASE("detect output is accepted by eval, report renders bundles") {
  const fs::path root = scratch("detect");
  const std::string fx = (root / "fx").string();
  REQUIRE(tland_run({"synth", "--out", fx, "--scans", "2", "--seed", "1", "--tooth-count", "6", "--mesh-format", "obj"}).code == 0);
  REQUIRE(tland_run({"detect", "--meshes", fx + "/meshes", "--out", (root / "det").string()}).code == 0);
  for (const auto& p : list_json_files(root / "det" / "predictions")) CHECK_NOTHROW(read_predictions_file(p));
  REQUIRE(tland_run({"eval", "--gt", fx + "/gt", "--pred", (root / "det" / "predictions").string(), "--out",
                     (root / "ev").string()})
              .code == 0);
  REQUIRE(tland_run({"report", "--eval", (root / "ev").string(), "--out", (root / "rep").string()}).code == 0);
  for (const char* cat : {"mesial_distal", "cusps", "inner_outer", "facial"}) {
    CHECK(fs::exists(root / "rep" / (std::string("boxplot_") + cat + ".svg")));
    CHECK(fs::exists(root / "rep" / (std::string("pr_") + cat + ".svg")));
  }
  CHECK(fs::exists(root / "rep" / "summary_table.csv"));
}

TEST_CASE("validation errors exit 2 with a machine-readable report") {
  const fs::path root = scratch("errors");
  fs::create_directories(root / "gt");
  fs::create_directories(root / "pred");
  { std::ofstream(root / "gt" / "a.json") << R"({"version":"1.1","scan_id":"a","objects":[]})"; }
  { std::ofstream(root / "pred" / "a.json") << R"({"version":"1.1","scan_id":"a","objects":[{"key":"x"}]})"; }
  { std::ofstream(root / "pred" / "b.json") << "not json"; }
  const Run r = tland_run({"eval", "--gt", (root / "gt").string(), "--pred", (root / "pred").string(), "--out",
                           (root / "out").string()});
  CHECK(r.code == 2);
  const auto report = nlohmann::json::parse(slurp(root / "out" / "errors.json"));
  CHECK(report["status"] == "error");
  CHECK(report["errors"].size() == 2);

  CHECK(tland_run({"eval", "--gt", (root / "missing").string(), "--pred", (root / "pred").string(), "--out",
                   (root / "out2").string()})
            .code == 2);
  CHECK(tland_run({"rank", "--gt", (root / "gt").string(), "--team", (root / "pred").string(), "--team",
                   (root / "pred").string(), "--name", "x", "--name", "y", "--p-threshold", "1.5", "--out",
                   (root / "out3").string()})
            .code == 2);
}

TEST_CASE("config file with flag overrides is echoed") {
  const fs::path root = scratch("config");
  {
    std::ofstream(root / "run.json") << R"({"seed": 4, "synth": {"scans": 3, "tooth_count": 4, "teams": [{"name": "q", "sigma": 0.2}]}})";
  }
  REQUIRE(tland_run({"synth", "--config", (root / "run.json").string(), "--out", (root / "fx").string(), "--scans", "2"}).code == 0);
  CHECK(list_json_files(root / "fx" / "gt").size() == 2);
  CHECK(list_json_files(root / "fx" / "teams" / "q").size() == 2);
  const auto echo = nlohmann::json::parse(slurp(root / "fx" / "config.json"));
  CHECK(echo["command"] == "synth");
  CHECK(echo["config"]["seed"] == 4);
  CHECK(echo["config"]["synth"]["scans"] == 2);
  CHECK(echo["config"]["synth"]["tooth_count"] == 4);

  { std::ofstream(root / "bad.json") << R"({"synth": {"scanz": 3}})"; }
  CHECK(tland_run({"synth", "--config", (root / "bad.json").string(), "--out", (root / "fx2").string()}).code == 2);
}
