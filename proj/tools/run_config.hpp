#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tland/geometry.hpp"
#include "tland/metrics.hpp"
#include "tland/ranking.hpp"
#include "tland/synth.hpp"

namespace tland::cli {

struct SynthTeam {
  std::string name;
  NoiseSpec noise;
};

// "name:sigma[:drop[:spurious[:overlap]]]"
SynthTeam parse_synth_team(const std::string& text);

/// Everything a run depends on. Loaded from a JSON config file, then
/// overridden by command-line flags, then echoed into the output directory.
/// Empty path strings mean "not given".
struct RunConfig {
  std::string gt_dir;
  std::string pred_dir;
  std::vector<std::string> team_dirs;
  std::vector<std::string> team_names;
  std::string mesh_dir;
  std::string eval_dir;
  std::string out_dir;

  double tau_step = 0.1;
  double tau_max = 3.0;
  bool include_zero = false;
  std::vector<double> taus;  // explicit grid, wins over step/max
  std::string hit_rule = "strict";
  bool assign_within_threshold = false;
  bool pooled = false;

  std::size_t iterations = 100;
  double drop_fraction = 0.1;
  double p_threshold = 0.001;
  std::string streams = "per_category";
  std::string bootstrap = "drop";
  std::string zero_method = "wilcox";

  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0: TLAND_WORKERS or hardware concurrency

  std::size_t scans = 10;
  std::size_t tooth_count = 14;
  double arch_radius = 25.0;
  double grid_spacing = 0.35;
  std::string mesh_format = "ply";
  std::string scan_prefix = "scan";
  std::vector<SynthTeam> synth_teams;

  BaselineParams baseline;

  ThresholdGrid grid() const;
  EvalOptions eval_options() const;
  RankingOptions ranking_options() const;
  StreamSelection stream_selection() const;

  nlohmann::ordered_json to_json() const;
  // Unknown keys are rejected so typos do not silently fall back to defaults.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace tland::cli
