#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "run_config.hpp"
#include "tland/geometry.hpp"
#include "tland/metrics.hpp"
#include "tland/parallel.hpp"
#include "tland/ranking.hpp"
#include "tland/report.hpp"
#include "tland/rng.hpp"
#include "tland/synth.hpp"
#include "tland/text.hpp"

namespace tland::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// One or more bad input files; reported together.
class InputErrors : public ValidationError {
 public:
  explicit InputErrors(std::vector<std::pair<std::string, std::string>> items)
      : ValidationError(items.size() == 1 ? items[0].second
                                          : std::to_string(items.size()) + " input files failed validation"),
        items_(std::move(items)) {}
  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

struct Flags {
  std::string config_path;
  std::vector<std::function<void(RunConfig&)>> apply;
};

template <typename T>
void option(CLI::App* app, Flags& flags, const std::string& name, T RunConfig::*field, const std::string& desc) {
  auto holder = std::make_shared<T>();
  CLI::Option* opt = app->add_option(name, *holder, desc);
  flags.apply.push_back([opt, holder, field](RunConfig& c) {
    if (opt->count() > 0) c.*field = *holder;
  });
}

void flag(CLI::App* app, Flags& flags, const std::string& name, bool RunConfig::*field, const std::string& desc) {
  auto holder = std::make_shared<bool>(false);
  CLI::Option* opt = app->add_flag(name, *holder, desc);
  flags.apply.push_back([opt, holder, field](RunConfig& c) {
    if (opt->count() > 0) c.*field = *holder;
  });
}

void common_options(CLI::App* app, Flags& flags) {
  app->add_option("--config", flags.config_path, "JSON run configuration; flags override it");
  option(app, flags, "--out", &RunConfig::out_dir, "Output directory");
  option(app, flags, "--workers", &RunConfig::workers, "Worker threads (default: TLAND_WORKERS or all cores)");
  option(app, flags, "--seed", &RunConfig::seed, "Master seed");
}

void grid_options(CLI::App* app, Flags& flags) {
  option(app, flags, "--gt", &RunConfig::gt_dir, "Ground-truth directory (*.json)");
  option(app, flags, "--tau-step", &RunConfig::tau_step, "Threshold grid step, mm");
  option(app, flags, "--tau-max", &RunConfig::tau_max, "Largest threshold, mm");
  option(app, flags, "--taus", &RunConfig::taus, "Explicit threshold list, mm");
  flag(app, flags, "--include-zero", &RunConfig::include_zero, "Prepend tau = 0 to the grid");
  option(app, flags, "--hit-rule", &RunConfig::hit_rule, "strict (d < tau) or inclusive (d <= tau)");
  flag(app, flags, "--assign-within-threshold", &RunConfig::assign_within_threshold,
       "Only assign references closer than the current threshold");
  flag(app, flags, "--pooled", &RunConfig::pooled, "Pool detections over scans instead of averaging per scan");
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string("missing ") + what);
  if (!fs::is_directory(path)) throw ValidationError(std::string(what) + " '" + path + "' is not a directory");
}

void require_out(const RunConfig& c) {
  if (c.out_dir.empty()) throw ValidationError("missing --out");
}

std::vector<LandmarkFile> load_dir(const std::string& dir, bool predictions) {
  std::vector<LandmarkFile> files;
  std::vector<std::pair<std::string, std::string>> errors;
  for (const auto& path : list_json_files(dir)) {
    try {
      files.push_back(predictions ? read_predictions_file(path) : read_ground_truth_file(path));
    } catch (const ValidationError& e) {
      errors.emplace_back(path.string(), e.what());
    }
  }
  if (!errors.empty()) throw InputErrors(std::move(errors));
  return files;
}

void echo_config(const RunConfig& c, const std::string& command) {
  fs::create_directories(c.out_dir);
  ojson j;
  j["command"] = command;
  j["config"] = c.to_json();
  write_text(fs::path(c.out_dir) / "config.json", j.dump(2) + "\n");
}

MetricReport evaluate_dirs(const RunConfig& c, const std::vector<LandmarkFile>& gt, const std::string& pred_dir) {
  const std::vector<LandmarkFile> preds = load_dir(pred_dir, true);
  return evaluate_submission(gt, preds, c.eval_options());
}

std::vector<LandmarkFile> load_ground_truth(const RunConfig& c) {
  require_dir(c.gt_dir, "ground-truth directory");
  auto gt = load_dir(c.gt_dir, false);
  if (gt.empty()) throw ValidationError("no ground-truth files in '" + c.gt_dir + "'");
  return gt;
}

int cmd_eval(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto gt = load_ground_truth(c);
  require_dir(c.pred_dir, "predictions directory");
  require_out(c);
  const MetricReport report = evaluate_dirs(c, gt, c.pred_dir);
  write_eval_data(report, c.out_dir);
  render_report(c.out_dir, c.out_dir);
  echo_config(c, "eval");
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  out << "scans " << report.scans.size() << "  mAP " << format_double(report.map) << "  mAR "
      << format_double(report.mar) << '\n';
  return kSuccess;
}

int cmd_rank(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.team_dirs.size() < 2) throw ValidationError("rank needs at least two --team directories");
  std::vector<std::string> names = c.team_names;
  if (names.empty()) {
    for (const auto& d : c.team_dirs) names.push_back(fs::path(d).lexically_normal().filename().string());
  }
  if (names.size() != c.team_dirs.size()) throw ValidationError("--name must be given once per --team");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw ValidationError("team names must be non-empty");
    if (std::count(names.begin(), names.end(), names[i]) > 1) {
      throw ValidationError("duplicate team name '" + names[i] + "'; pass --name");
    }
  }
  for (const auto& d : c.team_dirs) require_dir(d, "team directory");
  const auto gt = load_ground_truth(c);
  require_out(c);
  const RankingOptions ropts = c.ranking_options();
  const StreamSelection sel = c.stream_selection();

  std::vector<MetricReport> reports;
  for (std::size_t t = 0; t < c.team_dirs.size(); ++t) {
    reports.push_back(evaluate_dirs(c, gt, c.team_dirs[t]));
    for (const auto& w : reports.back().warnings) err << "warning: " << names[t] << ": " << w << '\n';
  }
  const MetricSamples samples = build_metric_samples(names, reports, sel);
  const RankingResult result = bootstrap_rank(samples, ropts);
  const auto entries = leaderboard(result, reports);

  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  write_text(dir / "leaderboard.csv", leaderboard_csv(entries));
  write_text(dir / "leaderboard.json", leaderboard_json(entries, result).dump(2) + "\n");
  write_text(dir / "pvalues.csv", pvalues_csv(result));
  write_text(dir / "points.csv", points_csv(result));
  echo_config(c, "rank");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out << (i + 1) << ". " << entries[i].team << "  rank " << format_double(entries[i].rank_score) << "  mAP "
        << format_double(entries[i].map) << "  mAR " << format_double(entries[i].mar) << '\n';
  }
  return kSuccess;
}

std::string scan_name(const RunConfig& c, std::size_t i) {
  std::ostringstream s;
  s << c.scan_prefix << std::setw(3) << std::setfill('0') << (i + 1);
  return s.str();
}

int cmd_synth(const RunConfig& c, std::ostream& out, std::ostream&) {
  require_out(c);
  if (c.scans < 1) throw ValidationError("--scans must be >= 1");
  if (c.scan_prefix.empty()) throw ValidationError("scan prefix must be non-empty");
  const MeshFormat format = mesh_format_from_name(c.mesh_format);
  const char* ext = format == MeshFormat::Obj ? ".obj" : format == MeshFormat::Stl ? ".stl" : ".ply";
  for (std::size_t t = 0; t < c.synth_teams.size(); ++t) {
    for (std::size_t u = t + 1; u < c.synth_teams.size(); ++u) {
      if (c.synth_teams[t].name == c.synth_teams[u].name) {
        throw ValidationError("duplicate synth team '" + c.synth_teams[t].name + "'");
      }
    }
  }

  std::vector<SyntheticScan> scans(c.scans);
  std::vector<std::vector<LandmarkFile>> team_files(c.scans);
  parallel_for(c.scans, c.workers, [&](std::size_t i) {
    ArchSpec spec;
    spec.tooth_count = c.tooth_count;
    spec.arch_radius = c.arch_radius;
    spec.grid_spacing = c.grid_spacing;
    spec.scan_id = scan_name(c, i);
    scans[i] = generate_arch(spec, derive_seed(c.seed, i));
    for (std::size_t t = 0; t < c.synth_teams.size(); ++t) {
      const std::uint64_t team_seed = derive_seed(derive_seed(c.seed, 0x5eed0000ULL + t), i);
      team_files[i].push_back(perturb(scans[i].ground_truth, c.synth_teams[t].noise, team_seed));
    }
  });

  const fs::path dir(c.out_dir);
  fs::create_directories(dir / "gt");
  fs::create_directories(dir / "meshes");
  for (const auto& t : c.synth_teams) fs::create_directories(dir / "teams" / t.name);
  for (std::size_t i = 0; i < c.scans; ++i) {
    const std::string id = scans[i].ground_truth.scan_id;
    write_landmark_file(scans[i].ground_truth, dir / "gt" / (id + ".json"));
    save_mesh(scans[i].mesh, dir / "meshes" / (id + ext), format);
    for (std::size_t t = 0; t < c.synth_teams.size(); ++t) {
      write_landmark_file(team_files[i][t], dir / "teams" / c.synth_teams[t].name / (id + ".json"));
    }
  }
  echo_config(c, "synth");
  out << "wrote " << c.scans << " scans to " << dir.string() << '\n';
  return kSuccess;
}

int cmd_detect(const RunConfig& c, std::ostream& out, std::ostream& err) {
  require_dir(c.mesh_dir, "mesh directory");
  require_out(c);
  std::vector<fs::path> meshes;
  for (const auto& entry : fs::directory_iterator(c.mesh_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".obj" || ext == ".ply" || ext == ".stl") meshes.push_back(entry.path());
  }
  std::sort(meshes.begin(), meshes.end());
  if (meshes.empty()) throw ValidationError("no meshes in '" + c.mesh_dir + "'");

  std::vector<LandmarkFile> results(meshes.size());
  std::vector<std::size_t> dropped(meshes.size(), 0);
  std::vector<std::string> failures(meshes.size());
  parallel_for(meshes.size(), c.workers, [&](std::size_t i) {
    try {
      const MeshLoadResult m = load_mesh(meshes[i]);
      dropped[i] = m.degenerate_faces_dropped;
      results[i] = baseline_detect(m.mesh, meshes[i].stem().string(), c.baseline);
    } catch (const ValidationError& e) {
      failures[i] = e.what();
    }
  });
  std::vector<std::pair<std::string, std::string>> errors;
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (!failures[i].empty()) errors.emplace_back(meshes[i].string(), failures[i]);
  }
  if (!errors.empty()) throw InputErrors(std::move(errors));

  // Predictions go to their own directory so the echoed config is not
  // mistaken for one.
  const fs::path dir = fs::path(c.out_dir) / "predictions";
  fs::create_directories(dir);
  std::size_t total = 0;
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (dropped[i] > 0) err << "warning: " << meshes[i].string() << ": dropped " << dropped[i] << " degenerate faces\n";
    write_landmark_file(results[i], dir / (results[i].scan_id + ".json"));
    total += results[i].objects.size();
  }
  echo_config(c, "detect");
  out << "detected " << total << " landmarks on " << meshes.size() << " meshes into " << dir.string() << '\n';
  return kSuccess;
}

int cmd_report(RunConfig c, std::ostream& out, std::ostream&) {
  require_dir(c.eval_dir, "eval directory");
  if (c.out_dir.empty()) c.out_dir = c.eval_dir;
  const auto written = render_report(c.eval_dir, c.out_dir);
  echo_config(c, "report");
  out << "wrote " << written.size() << " files to " << c.out_dir << '\n';
  return kSuccess;
}

void write_error_report(const RunConfig* c, const std::string& command, const ValidationError& e, std::ostream& err) {
  ojson j;
  j["status"] = "error";
  j["exit_code"] = static_cast<int>(kValidationError);
  j["command"] = command;
  ojson list = ojson::array();
  if (const auto* multi = dynamic_cast<const InputErrors*>(&e)) {
    for (const auto& [file, message] : multi->items()) list.push_back({{"file", file}, {"message", message}});
  } else {
    list.push_back({{"message", e.what()}});
  }
  j["errors"] = list;
  err << j.dump() << '\n';
  if (c != nullptr && !c->out_dir.empty()) {
    try {
      fs::create_directories(c->out_dir);
      write_text(fs::path(c->out_dir) / "errors.json", j.dump(2) + "\n");
    } catch (const std::exception&) {
      // The report already went to stderr.
    }
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dental landmark detection: evaluation, ranking and fixtures", "tland"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tland 0.3.0");

  std::map<CLI::App*, Flags> flags;
  auto* eval = app.add_subcommand("eval", "Score one submission against ground truth");
  auto* rank = app.add_subcommand("rank", "Bootstrap Wilcoxon ranking of several teams");
  auto* synth = app.add_subcommand("synth", "Generate synthetic arches, meshes and team predictions");
  auto* detect = app.add_subcommand("detect", "Run the baseline detector over a mesh directory");
  auto* report = app.add_subcommand("report", "Render SVG plots and tables from an eval directory");
  for (auto* sub : {eval, rank, synth, detect, report}) common_options(sub, flags[sub]);

  grid_options(eval, flags[eval]);
  option(eval, flags[eval], "--pred", &RunConfig::pred_dir, "Predictions directory (*.json)");

  grid_options(rank, flags[rank]);
  option(rank, flags[rank], "--team", &RunConfig::team_dirs, "Team prediction directory (repeat)");
  option(rank, flags[rank], "--name", &RunConfig::team_names, "Team name, once per --team");
  option(rank, flags[rank], "--iterations", &RunConfig::iterations, "Bootstrap iterations");
  option(rank, flags[rank], "--drop-fraction", &RunConfig::drop_fraction, "Fraction of scans removed per iteration");
  option(rank, flags[rank], "--p-threshold", &RunConfig::p_threshold, "Significance level for a point");
  option(rank, flags[rank], "--streams", &RunConfig::streams, "per_category (8 streams) or grand (mAP, mAR)");
  option(rank, flags[rank], "--bootstrap", &RunConfig::bootstrap, "drop or resample");
  option(rank, flags[rank], "--zero-method", &RunConfig::zero_method, "wilcox or pratt");

  option(synth, flags[synth], "--scans", &RunConfig::scans, "Number of scans");
  option(synth, flags[synth], "--tooth-count", &RunConfig::tooth_count, "Teeth per arch");
  option(synth, flags[synth], "--arch-radius", &RunConfig::arch_radius, "Arch half-width, mm");
  option(synth, flags[synth], "--grid-spacing", &RunConfig::grid_spacing, "Mesh resolution, mm");
  option(synth, flags[synth], "--mesh-format", &RunConfig::mesh_format, "ply, ply-ascii, obj or stl");
  option(synth, flags[synth], "--prefix", &RunConfig::scan_prefix, "Scan id prefix");
  auto team_specs = std::make_shared<std::vector<std::string>>();
  CLI::Option* team_opt =
      synth->add_option("--team", *team_specs, "Degraded team name:sigma[:drop[:spurious[:overlap]]] (repeat)");
  flags[synth].apply.push_back([team_opt, team_specs](RunConfig& c) {
    if (team_opt->count() == 0) return;
    c.synth_teams.clear();
    for (const auto& s : *team_specs) c.synth_teams.push_back(parse_synth_team(s));
  });

  option(detect, flags[detect], "--meshes", &RunConfig::mesh_dir, "Mesh directory (.obj/.ply/.stl)");
  option(report, flags[report], "--eval", &RunConfig::eval_dir, "Output directory of a previous eval");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << "tland 0.3.0\n";
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  std::unique_ptr<RunConfig> config;
  try {
    const Flags& f = flags[sub];
    config = std::make_unique<RunConfig>(f.config_path.empty() ? RunConfig{} : RunConfig::load(f.config_path));
    for (const auto& apply : f.apply) apply(*config);
    if (config->workers == 0) config->workers = default_workers();
    if (command == "eval") return cmd_eval(*config, out, err);
    if (command == "rank") return cmd_rank(*config, out, err);
    if (command == "synth") return cmd_synth(*config, out, err);
    if (command == "detect") return cmd_detect(*config, out, err);
    return cmd_report(*config, out, err);
  } catch (const ValidationError& e) {
    write_error_report(config.get(), command, e, err);
    return kValidationError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace tland::cli
