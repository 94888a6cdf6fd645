#include "run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "tland/common.hpp"
#include "tland/model.hpp"

namespace tland::cli {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

SynthTeam parse_synth_team(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() < 2 || parts.size() > 5 || parts[0].empty()) {
    throw ValidationError("team spec '" + text + "' must look like name:sigma[:drop[:spurious[:overlap]]]");
  }
  SynthTeam t;
  t.name = parts[0];
  try {
    t.noise.sigma = std::stod(parts[1]);
    if (parts.size() > 2) t.noise.drop_probability = std::stod(parts[2]);
    if (parts.size() > 3) t.noise.spurious_rate = std::stod(parts[3]);
    if (parts.size() > 4) t.noise.score_overlap = std::stod(parts[4]);
  } catch (const std::exception&) {
    throw ValidationError("team spec '" + text + "' has a non-numeric field");
  }
  t.noise.validate();
  return t;
}

ThresholdGrid RunConfig::grid() const {
  if (!taus.empty()) return ThresholdGrid(taus);
  return ThresholdGrid::uniform(tau_step, tau_max, include_zero);
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions o;
  o.grid = grid();
  if (hit_rule == "strict") {
    o.hit_rule = HitRule::Strict;
  } else if (hit_rule == "inclusive") {
    o.hit_rule = HitRule::Inclusive;
  } else {
    throw ValidationError("hit_rule must be 'strict' or 'inclusive'");
  }
  o.assign_within_threshold = assign_within_threshold;
  o.pooled = pooled;
  o.workers = workers;
  return o;
}

RankingOptions RunConfig::ranking_options() const {
  if (!(p_threshold > 0.0 && p_threshold < 1.0)) throw ValidationError("p_threshold must lie in (0, 1)");
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) throw ValidationError("drop_fraction must lie in [0, 1)");
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  RankingOptions o;
  o.iterations = iterations;
  o.drop_fraction = drop_fraction;
  o.p_threshold = p_threshold;
  o.seed = seed;
  o.workers = workers;
  if (bootstrap == "drop") {
    o.mode = BootstrapMode::DropSubset;
  } else if (bootstrap == "resample") {
    o.mode = BootstrapMode::ResampleWithReplacement;
  } else {
    throw ValidationError("bootstrap must be 'drop' or 'resample'");
  }
  if (zero_method == "wilcox") {
    o.wilcoxon.zero_method = ZeroMethod::Wilcox;
  } else if (zero_method == "pratt") {
    o.wilcoxon.zero_method = ZeroMethod::Pratt;
  } else {
    throw ValidationError("zero_method must be 'wilcox' or 'pratt'");
  }
  return o;
}

StreamSelection RunConfig::stream_selection() const {
  if (streams == "per_category") return StreamSelection::PerCategory;
  if (streams == "grand") return StreamSelection::Grand;
  throw ValidationError("streams must be 'per_category' or 'grand'");
}

ojson RunConfig::to_json() const {
  ojson teams = ojson::array();
  for (const auto& t : synth_teams) {
    teams.push_back({{"name", t.name},
                     {"sigma", t.noise.sigma},
                     {"drop_probability", t.noise.drop_probability},
                     {"spurious_rate", t.noise.spurious_rate},
                     {"score_overlap", t.noise.score_overlap}});
  }
  ojson j;
  j["paths"] = {{"gt_dir", gt_dir},     {"pred_dir", pred_dir}, {"team_dirs", team_dirs}, {"team_names", team_names},
                {"mesh_dir", mesh_dir}, {"eval_dir", eval_dir}, {"out_dir", out_dir}};
  j["grid"] = {{"tau_step", tau_step},
               {"tau_max", tau_max},
               {"include_zero", include_zero},
               {"taus", taus},
               {"hit_rule", hit_rule},
               {"assign_within_threshold", assign_within_threshold},
               {"pooled", pooled}};
  j["ranking"] = {{"iterations", iterations}, {"drop_fraction", drop_fraction}, {"p_threshold", p_threshold},
                  {"streams", streams},       {"bootstrap", bootstrap},         {"zero_method", zero_method}};
  j["seed"] = seed;
  j["workers"] = workers;
  j["synth"] = {{"scans", scans},
                {"tooth_count", tooth_count},
                {"arch_radius", arch_radius},
                {"grid_spacing", grid_spacing},
                {"mesh_format", mesh_format},
                {"scan_prefix", scan_prefix},
                {"teams", teams}};
  j["detect"] = {{"cusp_radius", baseline.cusp_radius},
                 {"min_curvature", baseline.min_curvature},
                 {"min_relative_height", baseline.min_relative_height},
                 {"tooth_height_fraction", baseline.tooth_height_fraction},
                 {"min_tooth_vertices", baseline.min_tooth_vertices},
                 {"side_band", baseline.side_band},
                 {"boundary_score", baseline.boundary_score}};
  return j;
}

namespace {

// Reads known keys of one section and rejects the rest.
class Section {
 public:
  Section(const json& node, std::string name) : node_(node), name_(std::move(name)) {
    if (!node_.is_object()) throw ValidationError("config section '" + name_ + "' must be an object");
  }
  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }
  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError("unknown config key '" + name_ + "." + it.key() + "'");
    }
  }

 private:
  const json& node_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  Section top(j, "config");
  json paths = json::object();
  json grid = json::object();
  json ranking = json::object();
  json synth = json::object();
  json detect = json::object();
  top.get("paths", paths);
  top.get("grid", grid);
  top.get("ranking", ranking);
  top.get("synth", synth);
  top.get("detect", detect);
  top.get("seed", c.seed);
  top.get("workers", c.workers);
  top.finish();

  Section p(paths, "paths");
  p.get("gt_dir", c.gt_dir);
  p.get("pred_dir", c.pred_dir);
  p.get("team_dirs", c.team_dirs);
  p.get("team_names", c.team_names);
  p.get("mesh_dir", c.mesh_dir);
  p.get("eval_dir", c.eval_dir);
  p.get("out_dir", c.out_dir);
  p.finish();

  Section g(grid, "grid");
  g.get("tau_step", c.tau_step);
  g.get("tau_max", c.tau_max);
  g.get("include_zero", c.include_zero);
  g.get("taus", c.taus);
  g.get("hit_rule", c.hit_rule);
  g.get("assign_within_threshold", c.assign_within_threshold);
  g.get("pooled", c.pooled);
  g.finish();

  Section r(ranking, "ranking");
  r.get("iterations", c.iterations);
  r.get("drop_fraction", c.drop_fraction);
  r.get("p_threshold", c.p_threshold);
  r.get("streams", c.streams);
  r.get("bootstrap", c.bootstrap);
  r.get("zero_method", c.zero_method);
  r.finish();

  Section s(synth, "synth");
  json teams = json::array();
  s.get("scans", c.scans);
  s.get("tooth_count", c.tooth_count);
  s.get("arch_radius", c.arch_radius);
  s.get("grid_spacing", c.grid_spacing);
  s.get("mesh_format", c.mesh_format);
  s.get("scan_prefix", c.scan_prefix);
  s.get("teams", teams);
  s.finish();
  if (!teams.is_array()) throw ValidationError("config key 'synth.teams' must be an array");
  for (const auto& t : teams) {
    Section ts(t, "synth.teams[]");
    SynthTeam team;
    ts.get("name", team.name);
    ts.get("sigma", team.noise.sigma);
    ts.get("drop_probability", team.noise.drop_probability);
    ts.get("spurious_rate", team.noise.spurious_rate);
    ts.get("score_overlap", team.noise.score_overlap);
    ts.finish();
    if (team.name.empty()) throw ValidationError("every synth team needs a name");
    team.noise.validate();
    c.synth_teams.push_back(team);
  }

  Section d(detect, "detect");
  d.get("cusp_radius", c.baseline.cusp_radius);
  d.get("min_curvature", c.baseline.min_curvature);
  d.get("min_relative_height", c.baseline.min_relative_height);
  d.get("tooth_height_fraction", c.baseline.tooth_height_fraction);
  d.get("min_tooth_vertices", c.baseline.min_tooth_vertices);
  d.get("side_band", c.baseline.side_band);
  d.get("boundary_score", c.baseline.boundary_score);
  d.finish();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace tland::cli
