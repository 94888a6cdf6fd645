#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "tland/geometry.hpp"
#include "tland/matching.hpp"
#include "tland/metrics.hpp"
#include "tland/model.hpp"
#include "tland/postprocess.hpp"
#include "tland/ranking.hpp"
#include "tland/synth.hpp"

namespace py = pybind11;
using namespace tland;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const Points& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw ValidationError("expected an (N, 3) array");
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[static_cast<std::size_t>(i)] = Vec3(r(i, 0), r(i, 1), r(i, 2));
  return out;
}

py::array_t<double> from_points(const std::vector<Vec3>& pts) {
  py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int k = 0; k < 3; ++k) w(static_cast<py::ssize_t>(i), k) = pts[i][k];
  }
  return a;
}

py::array_t<std::uint32_t> from_faces(const std::vector<Face>& faces) {
  py::array_t<std::uint32_t> a({static_cast<py::ssize_t>(faces.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < faces.size(); ++i) {
    for (int k = 0; k < 3; ++k) w(static_cast<py::ssize_t>(i), k) = faces[i][static_cast<std::size_t>(k)];
  }
  return a;
}

std::vector<Face> to_faces(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw ValidationError("expected an (F, 3) face array");
  std::vector<Face> out(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    for (int k = 0; k < 3; ++k) {
      if (r(i, k) < 0) throw ValidationError("negative vertex index");
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(r(i, k));
    }
  }
  return out;
}

py::object to_python(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::ordered_json from_python(const py::handle& obj) {
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return nlohmann::ordered_json::parse(text);
}

ThresholdGrid make_grid(const std::optional<std::vector<double>>& taus) {
  return taus ? ThresholdGrid(*taus) : ThresholdGrid::standard();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the tland landmark evaluation toolkit.";

  auto base_error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto validation_error = py::register_exception<ValidationError>(m, "ValidationError", base_error.ptr());
  py::register_exception<ParseError>(m, "ParseError", validation_error.ptr());

  py::enum_<LandmarkClass>(m, "LandmarkClass")
      .value("Cusp", LandmarkClass::Cusp)
      .value("Mesial", LandmarkClass::Mesial)
      .value("Distal", LandmarkClass::Distal)
      .value("Facial", LandmarkClass::FacialPoint)
      .value("Inner", LandmarkClass::InnerPoint)
      .value("Outer", LandmarkClass::OuterPoint);
  py::enum_<Category>(m, "Category")
      .value("Cusps", Category::Cusps)
      .value("MesialDistal", Category::MesialDistal)
      .value("InnerOuter", Category::InnerOuter)
      .value("Facial", Category::Facial);
  m.def("parse_landmark_class", [](const std::string& s) { return parse_landmark_class(s); });
  m.def("parse_category", [](const std::string& s) { return parse_category(s); });
  m.def("category_of", &category_of);
  m.def("class_name", [](LandmarkClass c) { return std::string(to_string(c)); });
  m.def("category_name", [](Category c) { return std::string(to_string(c)); });

  py::class_<Landmark>(m, "Landmark")
      .def(py::init([](std::string key, LandmarkClass cls, Vec3 pos) { return Landmark{std::move(key), cls, pos}; }),
           py::arg("key"), py::arg("cls"), py::arg("position"))
      .def_readwrite("key", &Landmark::key)
      .def_readwrite("cls", &Landmark::cls)
      .def_readwrite("position", &Landmark::position)
      .def(py::self == py::self)
      .def("__repr__", [](const Landmark& l) {
        std::ostringstream s;
        s << "Landmark(" << l.key << ", " << to_string(l.cls) << ", [" << l.position.x() << ", " << l.position.y()
          << ", " << l.position.z() << "])";
        return s.str();
      });
  py::class_<Prediction>(m, "Prediction")
      .def(py::init([](Landmark l, double score) { return Prediction{std::move(l), score}; }), py::arg("landmark"),
           py::arg("score"))
      .def_readwrite("landmark", &Prediction::landmark)
      .def_readwrite("score", &Prediction::score)
      .def(py::self == py::self);

  py::class_<LandmarkFile::Object>(m, "LandmarkObject")
      .def(py::init<>())
      .def_readwrite("landmark", &LandmarkFile::Object::landmark)
      .def_readwrite("score", &LandmarkFile::Object::score)
      .def(py::self == py::self);
  py::class_<LandmarkFile>(m, "LandmarkFile")
      .def(py::init<>())
      .def_readwrite("version", &LandmarkFile::version)
      .def_readwrite("scan_id", &LandmarkFile::scan_id)
      .def_readwrite("objects", &LandmarkFile::objects)
      .def_property(
          "extra", [](const LandmarkFile& f) { return to_python(f.extra); },
          [](LandmarkFile& f, const py::dict& d) { f.extra = from_python(d); })
      .def("has_scores", &LandmarkFile::has_scores)
      .def("landmarks", &LandmarkFile::landmarks)
      .def("predictions", &LandmarkFile::predictions)
      .def_static("from_landmarks",
                  [](std::string id, const std::vector<Landmark>& ls) { return LandmarkFile::from_landmarks(id, ls); })
      .def_static("from_predictions", [](std::string id, const std::vector<Prediction>& ps) {
        return LandmarkFile::from_predictions(id, ps);
      })
      .def(py::self == py::self);

  m.def("validate", py::overload_cast<const LandmarkFile&>(&validate));
  m.def("parse_ground_truth", [](const std::string& t) { return parse_ground_truth(t); });
  m.def("parse_predictions", [](const std::string& t) { return parse_predictions(t); });
  m.def("write_landmark_file", py::overload_cast<const LandmarkFile&>(&write_landmark_file));
  m.def("read_ground_truth_file", [](const std::string& p) { return read_ground_truth_file(p); });
  m.def("read_predictions_file", [](const std::string& p) { return read_predictions_file(p); });

  // Matching and metrics.
  py::class_<MatchRow>(m, "MatchRow")
      .def_readonly("prediction", &MatchRow::prediction)
      .def_readonly("score", &MatchRow::score)
      .def_readonly("reference", &MatchRow::reference)
      .def_readonly("distance", &MatchRow::distance);
  py::class_<MatchTable>(m, "MatchTable")
      .def_readonly("category", &MatchTable::category)
      .def_readonly("rows", &MatchTable::rows)
      .def_readonly("unmatched_references", &MatchTable::unmatched_references)
      .def_readonly("reference_count", &MatchTable::reference_count);
  m.def(
      "assign",
      [](const std::vector<Prediction>& p, const std::vector<Landmark>& r, Category c, std::optional<double> max_d) {
        return assign(p, r, c, AssignOptions{max_d});
      },
      py::arg("predictions"), py::arg("references"), py::arg("category"), py::arg("max_distance") = py::none());
  m.def(
      "hit_flags", [](const MatchTable& t, double tau, bool inclusive) {
        return hits(t, HitThreshold(tau), inclusive ? HitRule::Inclusive : HitRule::Strict).flags;
      },
      py::arg("table"), py::arg("tau"), py::arg("inclusive") = false);
  m.def("standard_taus", [](bool zero) {
    const auto t = ThresholdGrid::standard(zero).taus();
    return std::vector<double>(t.begin(), t.end());
  }, py::arg("include_zero") = false);
  m.def("average_precision", py::overload_cast<const std::vector<bool>&, std::size_t>(&average_precision),
        py::arg("ranked_hits"), py::arg("reference_count"));
  m.def(
      "average_precision_at",
      [](const MatchTable& t, double tau) { return average_precision(t, HitThreshold(tau)); }, py::arg("table"),
      py::arg("tau"));
  m.def(
      "average_recall",
      [](const MatchTable& t, std::optional<std::vector<double>> taus) { return average_recall(t, make_grid(taus)); },
      py::arg("table"), py::arg("taus") = py::none());
  m.def(
      "average_recall_from_curve",
      [](const std::vector<double>& taus, const std::vector<double>& recalls) {
        return average_recall_from_curve(taus, recalls);
      },
      py::arg("taus"), py::arg("recalls"));

  py::class_<MetricReport>(m, "MetricReport")
      .def_readonly("taus", &MetricReport::taus)
      .def_readonly("map", &MetricReport::map)
      .def_readonly("mar", &MetricReport::mar)
      .def_readonly("warnings", &MetricReport::warnings)
      .def_property_readonly("category_map",
                             [](const MetricReport& r) {
                               py::dict d;
                               for (Category c : kAllCategories) d[py::str(std::string(to_string(c)))] = r.categories[index_of(c)].map;
                               return d;
                             })
      .def_property_readonly("category_mar",
                             [](const MetricReport& r) {
                               py::dict d;
                               for (Category c : kAllCategories) d[py::str(std::string(to_string(c)))] = r.categories[index_of(c)].mar;
                               return d;
                             })
      .def("summary", [](const MetricReport& r) { return to_python(report_summary_json(r)); })
      .def("per_scan_csv", [](const MetricReport& r) { return report_csv(r); });
  m.def(
      "evaluate",
      [](const std::vector<LandmarkFile>& gt, const std::vector<LandmarkFile>& preds,
         std::optional<std::vector<double>> taus, bool inclusive, bool assign_within_threshold, bool pooled,
         unsigned workers) {
        EvalOptions o;
        o.grid = make_grid(taus);
        o.hit_rule = inclusive ? HitRule::Inclusive : HitRule::Strict;
        o.assign_within_threshold = assign_within_threshold;
        o.pooled = pooled;
        o.workers = workers;
        py::gil_scoped_release release;
        return evaluate_submission(gt, preds, o);
      },
      py::arg("ground_truth"), py::arg("predictions"), py::arg("taus") = py::none(), py::arg("inclusive") = false,
      py::arg("assign_within_threshold") = false, py::arg("pooled") = false, py::arg("workers") = 1);

  // Ranking.
  py::enum_<ZeroMethod>(m, "ZeroMethod").value("Wilcox", ZeroMethod::Wilcox).value("Pratt", ZeroMethod::Pratt);
  py::enum_<PValueMethod>(m, "PValueMethod")
      .value("Auto", PValueMethod::Auto)
      .value("Exact", PValueMethod::Exact)
      .value("Normal", PValueMethod::Normal);
  py::class_<WilcoxonResult>(m, "WilcoxonResult")
      .def_readonly("w_minus", &WilcoxonResult::w_minus)
      .def_readonly("w_plus", &WilcoxonResult::w_plus)
      .def_readonly("p_value", &WilcoxonResult::p_value)
      .def_readonly("n_nonzero", &WilcoxonResult::n_nonzero)
      .def_readonly("exact", &WilcoxonResult::exact)
      .def_readonly("no_evidence", &WilcoxonResult::no_evidence);
  m.def(
      "wilcoxon",
      [](const std::vector<double>& x, const std::vector<double>& y, ZeroMethod z, PValueMethod method) {
        WilcoxonOptions o;
        o.zero_method = z;
        o.method = method;
        return wilcoxon_signed_rank(x, y, o);
      },
      py::arg("x"), py::arg("y"), py::arg("zero_method") = ZeroMethod::Wilcox,
      py::arg("method") = PValueMethod::Auto);

  py::class_<RankingResult>(m, "RankingResult")
      .def_readonly("teams", &RankingResult::teams)
      .def_readonly("streams", &RankingResult::streams)
      .def_readonly("points", &RankingResult::points)
      .def_readonly("rank_score", &RankingResult::rank_score)
      .def_readonly("pvalues", &RankingResult::pvalues)
      .def_readonly("order", &RankingResult::order);
  m.def(
      "bootstrap_rank",
      [](const std::vector<std::string>& teams, const std::vector<std::vector<std::vector<double>>>& values,
         std::size_t iterations, double drop_fraction, std::uint64_t seed, double p_threshold, bool resample) {
        MetricSamples s;
        s.teams = teams;
        s.values = values;
        const std::size_t streams = values.empty() ? 0 : values[0].size();
        const std::size_t scans = streams == 0 ? 0 : values[0][0].size();
        for (std::size_t k = 0; k < streams; ++k) s.streams.push_back("s" + std::to_string(k));
        for (std::size_t i = 0; i < scans; ++i) s.scan_ids.push_back(std::to_string(i));
        RankingOptions o;
        o.iterations = iterations;
        o.drop_fraction = drop_fraction;
        o.seed = seed;
        o.p_threshold = p_threshold;
        o.mode = resample ? BootstrapMode::ResampleWithReplacement : BootstrapMode::DropSubset;
        return bootstrap_rank(s, o);
      },
      py::arg("teams"), py::arg("values"), py::arg("iterations") = 100, py::arg("drop_fraction") = 0.1,
      py::arg("seed") = 0, py::arg("p_threshold") = 0.001, py::arg("resample") = false,
      "values[team][stream][scan] of per-scan metrics.");
  m.def(
      "rank_reports",
      [](const std::vector<std::string>& teams, const std::vector<MetricReport>& reports, bool grand,
         std::size_t iterations, std::uint64_t seed) {
        RankingOptions o;
        o.iterations = iterations;
        o.seed = seed;
        return bootstrap_rank(
            build_metric_samples(teams, reports, grand ? StreamSelection::Grand : StreamSelection::PerCategory), o);
      },
      py::arg("teams"), py::arg("reports"), py::arg("grand") = false, py::arg("iterations") = 100,
      py::arg("seed") = 0);

  // Geometry.
  py::class_<TriangleMesh>(m, "TriangleMesh")
      .def(py::init([](const Points& v, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& f) {
             return TriangleMesh{to_points(v), to_faces(f), {}};
           }),
           py::arg("vertices"), py::arg("faces"))
      .def_property_readonly("vertices", [](const TriangleMesh& t) { return from_points(t.vertices); })
      .def_property_readonly("faces", [](const TriangleMesh& t) { return from_faces(t.faces); });
  m.def("load_mesh", [](const std::string& p) { return load_mesh(p).mesh; });
  m.def("mean_curvature", [](const TriangleMesh& t) { return mean_curvature(t).values; });
  m.def("fps", [](const Points& p, std::size_t k, std::uint64_t seed) { return fps(to_points(p), k, seed); },
        py::arg("points"), py::arg("k"), py::arg("seed") = 0);
  m.def("baseline_detect", [](const TriangleMesh& t, const std::string& id) { return baseline_detect(t, id); },
        py::arg("mesh"), py::arg("scan_id"));

  // Synthetic data.
  py::class_<SyntheticScan>(m, "SyntheticScan")
      .def_readonly("ground_truth", &SyntheticScan::ground_truth)
      .def_readonly("mesh", &SyntheticScan::mesh)
      .def_readonly("cusps_per_tooth", &SyntheticScan::cusps_per_tooth);
  m.def(
      "generate_arch",
      [](const std::string& scan_id, std::uint64_t seed, std::size_t teeth, double radius, double spacing) {
        ArchSpec s;
        s.scan_id = scan_id;
        s.tooth_count = teeth;
        s.arch_radius = radius;
        s.grid_spacing = spacing;
        return generate_arch(s, seed);
      },
      py::arg("scan_id") = "synth", py::arg("seed") = 0, py::arg("tooth_count") = 14, py::arg("arch_radius") = 25.0,
      py::arg("grid_spacing") = 0.35);
  m.def(
      "perturb",
      [](const LandmarkFile& gt, double sigma, double drop, double spurious, double overlap, std::uint64_t seed) {
        return perturb(gt, NoiseSpec{sigma, drop, spurious, overlap}, seed);
      },
      py::arg("ground_truth"), py::arg("sigma"), py::arg("drop_probability") = 0.0, py::arg("spurious_rate") = 0.0,
      py::arg("score_overlap") = 0.2, py::arg("seed") = 0);

  // Post-processing.
  py::class_<PointField>(m, "PointField")
      .def(py::init<>())
      .def_property(
          "points", [](const PointField& f) { return from_points(f.points); },
          [](PointField& f, const Points& p) { f.points = to_points(p); })
      .def_readwrite("confidence", &PointField::confidence)
      .def_readwrite("distance", &PointField::distance)
      .def_property(
          "offset", [](const PointField& f) { return from_points(f.offset); },
          [](PointField& f, const Points& p) { f.offset = to_points(p); })
      .def_readwrite("landmark_class", &PointField::landmark_class)
      .def("validate", &PointField::validate);
  m.def(
      "plant_field",
      [](const LandmarkFile& gt, std::optional<LandmarkClass> cls, double radius, std::size_t points,
         double noise, bool with_offsets, std::uint64_t seed) {
        PlantSpec s;
        s.landmark_class = cls;
        s.radius = radius;
        s.points_per_landmark = points;
        s.noise_sigma = noise;
        s.with_offsets = with_offsets;
        return plant_field(gt, s, seed);
      },
      py::arg("ground_truth"), py::arg("landmark_class") = py::none(), py::arg("radius") = 1.0,
      py::arg("points_per_landmark") = 40, py::arg("noise_sigma") = 0.0, py::arg("with_offsets") = true,
      py::arg("seed") = 0);
  m.def(
      "weighted_dbscan_extract",
      [](const PointField& f, double d_thresh, double eps, double min_weight) {
        WeightedDbscanParams p;
        p.d_thresh = d_thresh;
        p.eps = eps;
        p.min_weight = min_weight;
        return weighted_dbscan_extract(f, p);
      },
      py::arg("field"), py::arg("d_thresh") = 1.0, py::arg("eps") = 1.0, py::arg("min_weight") = 1.0);
  m.def("confidence_nms", &confidence_nms, py::arg("field"), py::arg("conf_thresh"), py::arg("radius"));
  m.def("density_cluster_peak", &density_cluster_peak, py::arg("field"), py::arg("conf_thresh") = 0.7,
        py::arg("eps") = 1.0);
  m.def(
      "gaussian_vote_extract",
      [](const PointField& f, double conf, double eps, double sigma) {
        return gaussian_vote_extract(f, GaussianVoteParams{conf, eps, sigma});
      },
      py::arg("field"), py::arg("conf_thresh") = 0.5, py::arg("eps") = 1.0, py::arg("sigma") = 0.5);
  py::class_<CtdNmsResult>(m, "CtdNmsResult")
      .def_readonly("landmarks", &CtdNmsResult::landmarks)
      .def_readonly("qualifying", &CtdNmsResult::qualifying)
      .def_readonly("plateau", &CtdNmsResult::plateau)
      .def_readonly("converged", &CtdNmsResult::converged)
      .def_readonly("iterations", &CtdNmsResult::iterations);
  m.def(
      "ctd_nms",
      [](const Points& points, const std::vector<double>& values, double graph_radius, double d_thresh,
         std::size_t max_iters) {
        const auto pts = to_points(points);
        return ctd_nms(MeshGraph::radius_graph(pts, graph_radius), values, d_thresh, max_iters, pts);
      },
      py::arg("points"), py::arg("values"), py::arg("graph_radius"), py::arg("d_thresh"),
      py::arg("max_iters") = 100, "Runs on the radius graph of the points.");
  m.def(
      "ctd_nms_mesh",
      [](const TriangleMesh& mesh, const std::vector<double>& values, double d_thresh, std::size_t max_iters) {
        return ctd_nms(MeshGraph::from_mesh(mesh), values, d_thresh, max_iters, mesh.vertices);
      },
      py::arg("mesh"), py::arg("values"), py::arg("d_thresh"), py::arg("max_iters") = 100);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in process; returns (exit_code, stdout, stderr).");
}
