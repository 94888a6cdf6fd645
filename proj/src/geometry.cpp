#include "tland/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <map>
#include <optional>

#include <Eigen/Eigenvalues>

#include "tland/kdtree.hpp"
#include "tland/rng.hpp"

namespace tland {

NormalsResult vertex_normals(const TriangleMesh& mesh) {
  NormalsResult out;
  out.normals.assign(mesh.vertices.size(), Vec3::Zero());
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    // |cross| is twice the face area, so the sum is area weighted.
    const Vec3 n = (b - a).cross(c - a);
    for (auto v : f) out.normals[v] += n;
  }
  for (auto& n : out.normals) {
    const double len = n.norm();
    if (len > 0.0 && std::isfinite(len)) {
      n /= len;
    } else {
      n.setZero();
      ++out.isolated;
    }
  }
  return out;
}

std::vector<std::array<std::uint32_t, 2>> mesh_edges(const TriangleMesh& mesh) {
  std::vector<std::array<std::uint32_t, 2>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      std::uint32_t a = f[k];
      std::uint32_t b = f[(k + 1) % 3];
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      edges.push_back({a, b});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::size_t> fps(std::span<const Vec3> points, std::size_t k, std::uint64_t seed) {
  const std::size_t n = points.size();
  if (k < 1 || k > n) throw ValidationError("fps: need 1 <= k <= number of points");
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t current = static_cast<std::size_t>(rng.below(n));
  for (;;) {
    chosen.push_back(current);
    if (chosen.size() == k) break;
    nearest[current] = -1.0;
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] < 0.0) continue;
      nearest[i] = std::min(nearest[i], squared_distance(points[i], points[current]));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    current = best;
  }
  return chosen;
}

namespace {

double cotangent(const Vec3& u, const Vec3& v) {
  const double cross = u.cross(v).norm();
  if (!(cross > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return u.dot(v) / cross;
}

}  // namespace

CurvatureField mean_curvature(const TriangleMesh& mesh) {
  const std::size_t n = mesh.vertices.size();
  std::vector<Vec3> laplace(n, Vec3::Zero());
  std::vector<double> area(n, 0.0);
  std::vector<bool> bad(n, false);

  for (const auto& f : mesh.faces) {
    const Vec3& p0 = mesh.vertices[f[0]];
    const Vec3& p1 = mesh.vertices[f[1]];
    const Vec3& p2 = mesh.vertices[f[2]];
    const Vec3* p[3] = {&p0, &p1, &p2};
    double cot[3];
    bool ok = true;
    for (int k = 0; k < 3; ++k) {
      cot[k] = cotangent(*p[(k + 1) % 3] - *p[k], *p[(k + 2) % 3] - *p[k]);
      ok = ok && std::isfinite(cot[k]);
    }
    if (!ok) {
      for (auto v : f) bad[v] = true;
      continue;
    }
    const double face_area = 0.5 * (p1 - p0).cross(p2 - p0).norm();
    for (int k = 0; k < 3; ++k) {
      const int i = (k + 1) % 3;
      const int j = (k + 2) % 3;
      // Edge (i, j) is opposite corner k.
      const Vec3 e = *p[i] - *p[j];
      laplace[f[i]] += cot[k] * e;
      laplace[f[j]] -= cot[k] * e;
    }
    // Mixed Voronoi area (Meyer et al.): Voronoi share for non-obtuse
    // triangles, otherwise half/quarter of the face.
    const bool obtuse = cot[0] < 0.0 || cot[1] < 0.0 || cot[2] < 0.0;
    for (int k = 0; k < 3; ++k) {
      double a;
      if (!obtuse) {
        const int i = (k + 1) % 3;
        const int j = (k + 2) % 3;
        a = ((*p[i] - *p[k]).squaredNorm() * cot[j] + (*p[j] - *p[k]).squaredNorm() * cot[i]) / 8.0;
      } else {
        a = cot[k] < 0.0 ? face_area / 2.0 : face_area / 4.0;
      }
      area[f[k]] += a;
    }
  }

  const NormalsResult normals = vertex_normals(mesh);
  CurvatureField out;
  out.values.assign(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    double h = 0.0;
    if (area[v] > 0.0) h = laplace[v].dot(normals.normals[v]) / (4.0 * area[v]);
    if (bad[v] || !std::isfinite(h)) {
      if (!std::isfinite(h)) ++out.non_finite;
      h = std::isfinite(h) ? h : 0.0;
    }
    if (std::abs(h) > kCurvatureClamp) {
      h = std::copysign(kCurvatureClamp, h);
      ++out.clamped;
    }
    out.values[v] = h;
  }
  return out;
}

namespace {

struct Segment {
  std::vector<std::uint32_t> vertices;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  double angle = 0.0;
};

}  // namespace

LandmarkFile baseline_detect(const TriangleMesh& mesh, const std::string& scan_id, const BaselineParams& params) {
  const std::size_t n = mesh.vertices.size();
  if (n < 3 || mesh.faces.empty()) throw ValidationError("baseline_detect: mesh is empty");

  Vec3 centroid = Vec3::Zero();
  for (const auto& v : mesh.vertices) centroid += v;
  centroid /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& v : mesh.vertices) {
    const Vec3 d = v - centroid;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d evals = eig.eigenvalues();
  // A flat patch is still usable (the axis is its normal); a line is not.
  if (!(evals(1) > 1e-12 * std::max(evals(2), 1e-300))) {
    throw ValidationError("baseline_detect: degenerate geometry (vertices do not span a plane)");
  }
  Vec3 up = eig.eigenvectors().col(0);
  const Vec3 axis_u = eig.eigenvectors().col(2);
  const Vec3 axis_v = up.cross(axis_u).normalized();

  std::vector<double> height(n);
  double skew = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    height[i] = (mesh.vertices[i] - centroid).dot(up);
    skew += height[i] * height[i] * height[i];
  }
  if (skew < 0.0) {
    up = -up;
    for (auto& h : height) h = -h;
  }

  LandmarkFile out;
  out.scan_id = scan_id;
  const auto [hmin_it, hmax_it] = std::minmax_element(height.begin(), height.end());
  const double hmin = *hmin_it;
  const double range = *hmax_it - hmin;
  if (!(range > 1e-9)) return out;

  const NormalsResult normals = vertex_normals(mesh);
  CurvatureField curvature = mean_curvature(mesh);
  double facing = 0.0;
  for (const auto& nv : normals.normals) facing += nv.dot(up);
  if (facing < 0.0) {
    for (auto& h : curvature.values) h = -h;
  }

  std::vector<double> rel(n);
  for (std::size_t i = 0; i < n; ++i) rel[i] = (height[i] - hmin) / range;

  KdTree tree(mesh.vertices);
  std::size_t next_key = 0;
  auto emit = [&](LandmarkClass cls, const Vec3& pos, double score) {
    LandmarkFile::Object obj;
    obj.landmark.key = std::string(1, static_cast<char>(std::tolower(to_string(cls)[0]))) + std::to_string(next_key++);
    obj.landmark.cls = cls;
    obj.landmark.position = pos;
    obj.score = std::clamp(score, 0.0, 1.0);
    out.objects.push_back(std::move(obj));
  };

  // Cusps: strict local height maxima on convex, elevated vertices.
  for (std::size_t i = 0; i < n; ++i) {
    const double h = curvature.values[i];
    if (rel[i] < params.min_relative_height || h < params.min_curvature) continue;
    bool is_max = true;
    for (std::size_t j : tree.within(mesh.vertices[i], params.cusp_radius)) {
      if (j == i) continue;
      if (height[j] > height[i] || (height[j] == height[i] && j < i)) {
        is_max = false;
        break;
      }
    }
    if (!is_max) continue;
    emit(LandmarkClass::Cusp, mesh.vertices[i], rel[i] * h / (h + params.min_curvature));
  }

  // Elevated segments: connected components of the raised region.
  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<bool> raised(n);
  for (std::size_t i = 0; i < n; ++i) raised[i] = rel[i] >= params.tooth_height_fraction;
  for (const auto& e : mesh_edges(mesh)) {
    if (raised[e[0]] && raised[e[1]]) parent[find(e[0])] = find(e[1]);
  }
  std::map<std::uint32_t, Segment> by_root;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (raised[i]) by_root[find(i)].vertices.push_back(i);
  }
  std::vector<Segment> segments;
  for (auto& [root, seg] : by_root) {
    if (seg.vertices.size() < params.min_tooth_vertices) continue;
    for (auto v : seg.vertices) {
      const Vec3 d = mesh.vertices[v] - centroid;
      seg.centroid += Eigen::Vector2d(d.dot(axis_u), d.dot(axis_v));
    }
    seg.centroid /= static_cast<double>(seg.vertices.size());
    segments.push_back(std::move(seg));
  }
  if (segments.empty()) return out;

  Eigen::Vector2d arch_center = Eigen::Vector2d::Zero();
  for (const auto& s : segments) arch_center += s.centroid;
  arch_center /= static_cast<double>(segments.size());
  for (auto& s : segments) {
    const Eigen::Vector2d d = s.centroid - arch_center;
    s.angle = std::atan2(d.y(), d.x());
  }
  std::sort(segments.begin(), segments.end(), [](const Segment& a, const Segment& b) { return a.angle < b.angle; });
  // Open the ring at the widest angular gap, i.e. the open end of the arch.
  std::size_t cut = 0;
  double widest = -1.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const double a = segments[i].angle;
    const double b = i + 1 < segments.size() ? segments[i + 1].angle : segments[0].angle + 2.0 * std::numbers::pi;
    if (b - a > widest) {
      widest = b - a;
      cut = (i + 1) % segments.size();
    }
  }
  std::rotate(segments.begin(), segments.begin() + static_cast<std::ptrdiff_t>(cut), segments.end());

  const std::size_t count = segments.size();
  const double midline = 0.5 * static_cast<double>(count - 1);
  auto lift = [&](const Eigen::Vector2d& p) { return Vec3(axis_u * p.x() + axis_v * p.y()); };

  for (std::size_t s = 0; s < count; ++s) {
    const Segment& seg = segments[s];
    Eigen::Vector2d tangent;
    if (count == 1) {
      tangent = Eigen::Vector2d(1.0, 0.0);
    } else {
      const Eigen::Vector2d& prev = segments[s == 0 ? 0 : s - 1].centroid;
      const Eigen::Vector2d& next = segments[s + 1 < count ? s + 1 : s].centroid;
      tangent = next - prev;
    }
    if (tangent.norm() == 0.0) tangent = Eigen::Vector2d(1.0, 0.0);
    tangent.normalize();
    Eigen::Vector2d outward = seg.centroid - arch_center;
    outward -= outward.dot(tangent) * tangent;
    if (outward.norm() < 1e-9) outward = Eigen::Vector2d(-tangent.y(), tangent.x());
    outward.normalize();
    const Vec3 t3 = lift(tangent);
    const Vec3 o3 = lift(outward);
    const Vec3 c3 = centroid + lift(seg.centroid);

    double half_length = 0.0;
    double seg_top = -std::numeric_limits<double>::infinity();
    double seg_low = std::numeric_limits<double>::infinity();
    for (auto v : seg.vertices) {
      half_length = std::max(half_length, std::abs((mesh.vertices[v] - c3).dot(t3)));
      seg_top = std::max(seg_top, height[v]);
      seg_low = std::min(seg_low, height[v]);
    }
    const double seg_range = std::max(seg_top - seg_low, 1e-9);
    const double band = params.side_band * half_length;

    // Each candidate: the best vertex under `key` among those passing `keep`.
    auto extreme = [&](auto keep, auto key) -> std::optional<std::uint32_t> {
      std::optional<std::uint32_t> best;
      double best_key = -std::numeric_limits<double>::infinity();
      for (auto v : seg.vertices) {
        if (!keep(v)) continue;
        const double k = key(v);
        if (k > best_key) {
          best_key = k;
          best = v;
        }
      }
      return best;
    };
    auto along = [&](std::uint32_t v) { return (mesh.vertices[v] - c3).dot(t3); };
    auto across = [&](std::uint32_t v) { return (mesh.vertices[v] - c3).dot(o3); };
    auto level = [&](std::uint32_t v) { return (height[v] - seg_low) / seg_range; };
    auto central = [&](std::uint32_t v) { return std::abs(along(v)) <= band; };

    if (auto v = extreme([&](std::uint32_t u) { return central(u) && level(u) >= 0.4 && level(u) <= 0.8; }, across)) {
      emit(LandmarkClass::FacialPoint, mesh.vertices[*v], params.boundary_score);
    }
    if (auto v = extreme([&](std::uint32_t u) { return central(u) && level(u) <= 0.2; }, across)) {
      emit(LandmarkClass::OuterPoint, mesh.vertices[*v], params.boundary_score);
    }
    if (auto v = extreme([&](std::uint32_t u) { return central(u) && level(u) <= 0.2; },
                         [&](std::uint32_t u) { return -across(u); })) {
      emit(LandmarkClass::InnerPoint, mesh.vertices[*v], params.boundary_score);
    }
    // Mesial faces the arch midline.
    const double toward_mid = static_cast<double>(s) <= midline ? 1.0 : -1.0;
    auto contact_band = [&](std::uint32_t u) { return level(u) >= 0.3 && std::abs(across(u)) <= band; };
    if (auto v = extreme(contact_band, [&](std::uint32_t u) { return toward_mid * along(u); })) {
      emit(LandmarkClass::Mesial, mesh.vertices[*v], params.boundary_score);
    }
    if (auto v = extreme(contact_band, [&](std::uint32_t u) { return -toward_mid * along(u); })) {
      emit(LandmarkClass::Distal, mesh.vertices[*v], params.boundary_score);
    }
  }
  return out;
}

}  // namespace tland
