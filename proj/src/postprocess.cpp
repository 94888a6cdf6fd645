#include "tland/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

#include "tland/kdtree.hpp"
#include "tland/text.hpp"

namespace tland {

void PointField::validate() const {
  const std::size_t n = points.size();
  if (!confidence.empty() && confidence.size() != n) throw ValidationError("point field: confidence length mismatch");
  if (!distance.empty() && distance.size() != n) throw ValidationError("point field: distance length mismatch");
  if (!offset.empty() && offset.size() != n) throw ValidationError("point field: offset length mismatch");
  for (const auto& p : points) {
    if (!is_finite(p)) throw ValidationError("point field: non-finite position");
  }
  for (double c : confidence) {
    if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("point field: confidence outside [0,1]");
  }
  for (double d : distance) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError("point field: negative or non-finite distance");
  }
  for (const auto& o : offset) {
    if (!is_finite(o)) throw ValidationError("point field: non-finite offset");
  }
}

std::string write_point_field_csv(const PointField& field) {
  field.validate();
  std::ostringstream out;
  out << "# class=" << to_string(field.landmark_class) << "\n";
  out << "x,y,z";
  if (field.has_confidence()) out << ",conf";
  if (field.has_distance()) out << ",dist";
  if (field.has_offset()) out << ",ox,oy,oz";
  out << "\n";
  for (std::size_t i = 0; i < field.size(); ++i) {
    const Vec3& p = field.points[i];
    out << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z());
    if (field.has_confidence()) out << ',' << format_double(field.confidence[i]);
    if (field.has_distance()) out << ',' << format_double(field.distance[i]);
    if (field.has_offset()) {
      const Vec3& o = field.offset[i];
      out << ',' << format_double(o.x()) << ',' << format_double(o.y()) << ',' << format_double(o.z());
    }
    out << "\n";
  }
  return out.str();
}

PointField read_point_field_csv(std::string_view text) {
  PointField field;
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> columns;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else if (c != '\r' && c != ' ') {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      const auto pos = line.find("class=");
      if (pos != std::string::npos) {
        std::string name = line.substr(pos + 6);
        while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
        field.landmark_class = parse_landmark_class(name);
      }
      continue;
    }
    if (columns.empty()) {
      columns = split(line);
      if (columns.size() < 3 || columns[0] != "x" || columns[1] != "y" || columns[2] != "z") {
        throw ParseError("point field CSV must start with x,y,z columns");
      }
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != columns.size()) throw ParseError("point field CSV: ragged row");
    Vec3 p = Vec3::Zero();
    Vec3 o = Vec3::Zero();
    bool has_o = false;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("point field CSV: bad number '" + cells[c] + "'");
      }
      const std::string& name = columns[c];
      if (name == "x") p.x() = v;
      else if (name == "y") p.y() = v;
      else if (name == "z") p.z() = v;
      else if (name == "conf") field.confidence.push_back(v);
      else if (name == "dist") field.distance.push_back(v);
      else if (name == "ox") { o.x() = v; has_o = true; }
      else if (name == "oy") o.y() = v;
      else if (name == "oz") o.z() = v;
      else throw ParseError("point field CSV: unknown column '" + name + "'");
    }
    field.points.push_back(p);
    if (has_o) field.offset.push_back(o);
  }
  field.validate();
  return field;
}

MeshGraph::MeshGraph(std::size_t vertex_count, std::span<const std::array<std::uint32_t, 2>> edges)
    : adjacency_(vertex_count) {
  for (const auto& e : edges) {
    if (e[0] >= vertex_count || e[1] >= vertex_count) throw ValidationError("graph edge out of range");
    if (e[0] == e[1]) continue;
    adjacency_[e[0]].push_back(e[1]);
    adjacency_[e[1]].push_back(e[0]);
  }
  for (auto& a : adjacency_) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
}

MeshGraph MeshGraph::from_mesh(const TriangleMesh& mesh) {
  const auto edges = mesh_edges(mesh);
  return MeshGraph(mesh.vertices.size(), edges);
}

MeshGraph MeshGraph::radius_graph(std::span<const Vec3> points, double radius) {
  KdTree tree(points);
  std::vector<std::array<std::uint32_t, 2>> edges;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j : tree.within(points[i], radius)) {
      if (j > i && distance(points[i], points[j]) < radius) {
        edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
      }
    }
  }
  return MeshGraph(points.size(), edges);
}

Clustering weighted_dbscan(std::span<const Vec3> points, std::span<const double> weights, double eps,
                           double min_weight) {
  if (weights.size() != points.size()) throw ValidationError("dbscan: one weight per point required");
  if (!(eps > 0.0)) throw ValidationError("dbscan: eps must be positive");
  const std::size_t n = points.size();
  KdTree tree(points);
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i] = tree.within(points[i], eps);
    double w = 0.0;
    for (std::size_t j : neighbors[i]) w += weights[j];
    core[i] = w >= min_weight;
  }
  Clustering out;
  out.labels.assign(n, -1);
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || out.labels[seed] != -1) continue;
    const int label = out.cluster_count++;
    std::deque<std::size_t> queue{seed};
    out.labels[seed] = label;
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      if (!core[i]) continue;
      for (std::size_t j : neighbors[i]) {
        if (out.labels[j] != -1) continue;
        out.labels[j] = label;
        queue.push_back(j);
      }
    }
  }
  return out;
}

namespace {

std::string make_key(std::string_view prefix, std::size_t i) { return std::string(prefix) + std::to_string(i); }

std::vector<std::size_t> above_threshold(const PointField& field, double conf_thresh) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field.confidence[i] >= conf_thresh) out.push_back(i);
  }
  return out;
}

Vec3 displaced(const PointField& field, std::size_t i) {
  return field.has_offset() ? Vec3(field.points[i] + field.offset[i]) : field.points[i];
}

}  // namespace

std::vector<Prediction> weighted_dbscan_extract(const PointField& field, const WeightedDbscanParams& params) {
  field.validate();
  if (!field.has_distance() || !field.has_offset()) {
    throw ValidationError("weighted_dbscan_extract: field needs distance and offset channels");
  }
  std::vector<Vec3> proposals;
  std::vector<double> weights;
  std::vector<double> dists;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!(field.distance[i] < params.d_thresh)) continue;
    proposals.push_back(field.points[i] + field.offset[i]);
    weights.push_back(1.0 / (field.distance[i] + kDistanceWeightEpsilon));
    dists.push_back(field.distance[i]);
  }
  std::vector<double> core_weights = weights;
  if (params.criterion == CoreCriterion::Count) core_weights.assign(weights.size(), 1.0);
  const Clustering clusters = weighted_dbscan(proposals, core_weights, params.eps, params.min_weight);

  std::vector<Vec3> sum(static_cast<std::size_t>(clusters.cluster_count), Vec3::Zero());
  std::vector<double> wsum(sum.size(), 0.0);
  std::vector<double> best(sum.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const int l = clusters.labels[i];
    if (l < 0) continue;
    sum[l] += weights[i] * proposals[i];
    wsum[l] += weights[i];
    best[l] = std::min(best[l], dists[i]);
  }
  std::vector<Prediction> out;
  for (std::size_t c = 0; c < sum.size(); ++c) {
    out.push_back({{make_key("wd", c), field.landmark_class, sum[c] / wsum[c]}, std::exp(-best[c])});
  }
  return out;
}

std::vector<Prediction> confidence_nms(const PointField& field, double conf_thresh, double radius) {
  field.validate();
  if (!field.has_confidence()) throw ValidationError("confidence_nms: field needs a confidence channel");
  auto order = above_threshold(field, conf_thresh);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return field.confidence[a] > field.confidence[b]; });
  std::vector<Prediction> out;
  for (std::size_t i : order) {
    const Vec3 p = displaced(field, i);
    const bool suppressed = std::any_of(out.begin(), out.end(), [&](const Prediction& kept) {
      return distance(kept.landmark.position, p) < radius;
    });
    if (suppressed) continue;
    out.push_back({{make_key("nms", out.size()), field.landmark_class, p}, field.confidence[i]});
  }
  return out;
}

std::vector<Prediction> density_cluster_peak(const PointField& field, double conf_thresh, double eps) {
  field.validate();
  if (!field.has_confidence()) throw ValidationError("density_cluster_peak: field needs a confidence channel");
  const auto survivors = above_threshold(field, conf_thresh);
  std::vector<Vec3> pts;
  for (std::size_t i : survivors) pts.push_back(field.points[i]);
  const std::vector<double> unit(pts.size(), 1.0);
  const Clustering clusters = weighted_dbscan(pts, unit, eps, 1.0);
  std::vector<std::optional<std::size_t>> peak(static_cast<std::size_t>(clusters.cluster_count));
  for (std::size_t k = 0; k < survivors.size(); ++k) {
    const int l = clusters.labels[k];
    if (l < 0) continue;
    const std::size_t i = survivors[k];
    if (!peak[l] || field.confidence[i] > field.confidence[*peak[l]]) peak[l] = i;
  }
  std::vector<Prediction> out;
  for (std::size_t c = 0; c < peak.size(); ++c) {
    const std::size_t i = *peak[c];
    out.push_back({{make_key("dc", c), field.landmark_class, field.points[i]}, field.confidence[i]});
  }
  return out;
}

Vec3 gaussian_weighted_vote(std::span<const Vec3> cluster, double sigma, std::optional<Vec3> center_estimate) {
  if (cluster.empty()) throw ValidationError("gaussian_weighted_vote: empty cluster");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("gaussian_weighted_vote: sigma must be positive");
  Vec3 center = Vec3::Zero();
  if (center_estimate) {
    center = *center_estimate;
  } else {
    for (const auto& p : cluster) center += p;
    center /= static_cast<double>(cluster.size());
  }
  Vec3 sum = Vec3::Zero();
  double wsum = 0.0;
  for (const auto& p : cluster) {
    const double w = std::exp(-squared_distance(p, center) / (2.0 * sigma * sigma));
    sum += w * p;
    wsum += w;
  }
  if (!(wsum > 0.0)) return center;  // every weight underflowed
  return sum / wsum;
}

std::vector<Prediction> gaussian_vote_extract(const PointField& field, const GaussianVoteParams& params) {
  field.validate();
  if (!field.has_confidence()) throw ValidationError("gaussian_vote_extract: field needs a confidence channel");
  const auto survivors = above_threshold(field, params.conf_thresh);
  std::vector<Vec3> pts;
  for (std::size_t i : survivors) pts.push_back(displaced(field, i));
  const std::vector<double> unit(pts.size(), 1.0);
  const Clustering clusters = weighted_dbscan(pts, unit, params.eps, 1.0);
  std::vector<std::vector<Vec3>> members(static_cast<std::size_t>(clusters.cluster_count));
  std::vector<double> peak(members.size(), 0.0);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const int l = clusters.labels[k];
    if (l < 0) continue;
    members[l].push_back(pts[k]);
    peak[l] = std::max(peak[l], field.confidence[survivors[k]]);
  }
  std::vector<Prediction> out;
  for (std::size_t c = 0; c < members.size(); ++c) {
    out.push_back({{make_key("gv", c), field.landmark_class, gaussian_weighted_vote(members[c], params.sigma)}, peak[c]});
  }
  return out;
}

CtdNmsResult ctd_nms(const MeshGraph& graph, std::span<const double> values, double d_thresh, std::size_t max_iters,
                     std::span<const Vec3> positions) {
  const std::size_t n = graph.size();
  if (values.size() != n) throw ValidationError("ctd_nms: one value per vertex required");
  if (!positions.empty() && positions.size() != n) throw ValidationError("ctd_nms: one position per vertex required");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("ctd_nms: non-finite value");
  }
  CtdNmsResult result;
  std::vector<double> current(values.begin(), values.end());
  std::vector<double> next(n);
  while (result.iterations < max_iters) {
    bool changed = false;
    for (std::size_t v = 0; v < n; ++v) {
      double m = current[v];
      for (auto u : graph.neighbors(v)) m = std::min(m, current[u]);
      next[v] = m;
      changed = changed || m != current[v];
    }
    ++result.iterations;
    current.swap(next);
    if (!changed) {
      result.converged = true;
      break;
    }
  }
  if (n == 0) result.converged = true;

  std::vector<bool> qualifies(n, false);
  for (std::size_t v = 0; v < n; ++v) {
    if (current[v] == values[v] && values[v] < d_thresh) {
      qualifies[v] = true;
      result.qualifying.push_back(v);
    }
  }

  std::vector<bool> seen(n, false);
  for (std::size_t start : result.qualifying) {
    if (seen[start]) continue;
    std::vector<std::size_t> plateau{start};
    seen[start] = true;
    for (std::size_t k = 0; k < plateau.size(); ++k) {
      for (auto u : graph.neighbors(plateau[k])) {
        if (!seen[u] && qualifies[u] && values[u] == values[start]) {
          seen[u] = true;
          plateau.push_back(u);
        }
      }
    }
    std::sort(plateau.begin(), plateau.end());
    if (plateau.size() > 1) result.plateau = true;
    std::size_t pick = plateau.front();
    if (!positions.empty() && plateau.size() > 1) {
      Vec3 c = Vec3::Zero();
      for (auto v : plateau) c += positions[v];
      c /= static_cast<double>(plateau.size());
      double best = std::numeric_limits<double>::infinity();
      for (auto v : plateau) {
        const double d = squared_distance(positions[v], c);
        if (d < best) {
          best = d;
          pick = v;
        }
      }
    }
    result.landmarks.push_back(pick);
  }
  std::sort(result.landmarks.begin(), result.landmarks.end());
  return result;
}

}  // namespace tland
