#include "tland/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

#include "tland/kdtree.hpp"
#include "tland/rng.hpp"

namespace tland {

namespace {

struct ToothShape {
  double half_length;  // along the arch
  double half_width;   // across the arch
  int default_cusps;   // 0: draw 3-5
};

// Indexed by distance from the midline in tooth slots.
constexpr ToothShape kShapes[] = {
    {4.2, 3.2, 1},  // central incisor
    {3.4, 3.0, 1},  // lateral incisor
    {3.8, 3.8, 1},  // canine
    {3.5, 4.5, 2},  // first premolar
    {3.5, 4.5, 2},  // second premolar
    {5.0, 5.2, 0},  // molars
};

const ToothShape& shape_for_slot(std::size_t slot) {
  return kShapes[std::min<std::size_t>(slot, std::size(kShapes) - 1)];
}

constexpr double kBodyHeight = 6.0;
constexpr double kCapRadius = 2.0;
constexpr double kCapHeight = 0.9;
constexpr double kGumHeight = 1.2;

struct Cusp {
  double t;
  double n;
  double apex;
};

struct Tooth {
  Eigen::Vector2d center;
  Eigen::Vector2d distal;   // unit, along the arch away from the midline
  Eigen::Vector2d outward;  // unit, buccal/labial
  double a;
  double b;
  double height;
  std::vector<Cusp> cusps;

  double profile(double u) const {
    const double u4 = u * u * u * u;
    return u4 < 1.0 ? std::sqrt(1.0 - u4) : 0.0;
  }
  double body(double t, double n) const { return height * profile(t / a) * profile(n / b); }

  Eigen::Vector2d local(const Eigen::Vector2d& q) const {
    const Eigen::Vector2d d = q - center;
    return {d.dot(distal), d.dot(outward)};
  }
  Eigen::Vector2d world(double t, double n) const { return center + t * distal + n * outward; }

  double surface(const Eigen::Vector2d& tn) const {
    double z = body(tn.x(), tn.y());
    for (const auto& c : cusps) {
      const double r2 = (tn.x() - c.t) * (tn.x() - c.t) + (tn.y() - c.n) * (tn.y() - c.n);
      if (r2 < kCapRadius * kCapRadius) z = std::max(z, c.apex - kCapRadius + std::sqrt(kCapRadius * kCapRadius - r2));
    }
    return z;
  }
  double gum(const Eigen::Vector2d& tn) const {
    const double u = tn.x() / (a + 1.5);
    const double v = tn.y() / (b + 2.5);
    const double s = u * u + v * v;
    return kGumHeight * std::exp(-s * s);
  }
};

std::vector<Eigen::Vector2d> cusp_layout(int count) {
  switch (count) {
    case 1: return {{0.0, 0.0}};
    case 2: return {{0.0, 0.42}, {0.0, -0.42}};
    case 3: return {{-0.42, 0.42}, {0.42, 0.42}, {0.0, -0.42}};
    case 4: return {{-0.42, 0.42}, {0.42, 0.42}, {-0.42, -0.42}, {0.42, -0.42}};
    default: return {{-0.55, 0.45}, {0.0, 0.45}, {0.55, 0.45}, {-0.35, -0.45}, {0.35, -0.45}};
  }
}

// Arc length of the ellipse (R cos p, D sin p) tabulated from p = pi/2
// downwards, for the right half of the arch.
struct ArcTable {
  double R;
  double D;
  std::vector<double> phi;
  std::vector<double> s;

  ArcTable(double r, double d) : R(r), D(d) {
    constexpr int kSteps = 4000;
    const double lo = -std::numbers::pi / 2.0;
    const double hi = std::numbers::pi / 2.0;
    const double h = (hi - lo) / kSteps;
    phi.push_back(hi);
    s.push_back(0.0);
    for (int i = 1; i <= kSteps; ++i) {
      const double p0 = hi - (i - 1) * h;
      const double p1 = hi - i * h;
      const double pm = 0.5 * (p0 + p1);
      const double ds = h * std::hypot(R * std::sin(pm), D * std::cos(pm));
      phi.push_back(p1);
      s.push_back(s.back() + ds);
    }
  }
  double quarter_length() const {
    const std::size_t mid = phi.size() / 2;  // phi = 0
    return s[mid];
  }
  double phi_at(double length) const {
    auto it = std::lower_bound(s.begin(), s.end(), length);
    if (it == s.end()) return phi.back();
    if (it == s.begin()) return phi.front();
    const std::size_t i = static_cast<std::size_t>(it - s.begin());
    const double f = (length - s[i - 1]) / (s[i] - s[i - 1]);
    return phi[i - 1] + f * (phi[i] - phi[i - 1]);
  }
};

}  // namespace

void ArchSpec::validate() const {
  if (tooth_count < 1) throw ValidationError("arch needs at least one tooth");
  if (!(arch_radius > 0.0)) throw ValidationError("arch radius must be positive");
  if (!(grid_spacing > 0.0)) throw ValidationError("grid spacing must be positive");
  if (!(gap >= 0.0)) throw ValidationError("tooth gap must be non-negative");
  if (!cusps_per_tooth.empty() && cusps_per_tooth.size() != tooth_count) {
    throw ValidationError("cusps_per_tooth must list every tooth");
  }
  for (int c : cusps_per_tooth) {
    if (c < 1 || c > 5) throw ValidationError("cusp count per tooth must lie in [1, 5]");
  }
  if (scan_id.empty()) throw ValidationError("scan_id is empty");
}

namespace {

std::size_t slot_of(std::size_t tooth, std::size_t count) {
  const double s = static_cast<double>(tooth) - 0.5 * static_cast<double>(count - 1);
  return static_cast<std::size_t>(std::floor(std::abs(s) + (count % 2 == 0 ? -0.5 : 0.0) + 1e-9));
}

}  // namespace

std::vector<int> resolve_cusp_counts(const ArchSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (!spec.cusps_per_tooth.empty()) return spec.cusps_per_tooth;
  Rng rng(derive_seed(seed, 1));
  std::vector<int> out;
  for (std::size_t i = 0; i < spec.tooth_count; ++i) {
    const int d = shape_for_slot(slot_of(i, spec.tooth_count)).default_cusps;
    out.push_back(d > 0 ? d : 3 + static_cast<int>(rng.below(3)));
  }
  return out;
}

SyntheticScan generate_arch(const ArchSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticScan scan;
  scan.cusps_per_tooth = resolve_cusp_counts(spec, seed);
  Rng rng(derive_seed(seed, 2));
  const std::size_t count = spec.tooth_count;

  // Sizes first, then arc-length positions from the midline.
  std::vector<double> a(count);
  std::vector<double> b(count);
  for (std::size_t i = 0; i < count; ++i) {
    const ToothShape& shape = shape_for_slot(slot_of(i, count));
    a[i] = shape.half_length * rng.uniform(0.97, 1.03);
    b[i] = shape.half_width * rng.uniform(0.97, 1.03);
  }
  // Signed arc position of each tooth center; negative is the left side.
  std::vector<double> pos(count);
  const std::size_t right_begin = count / 2;
  if (count % 2 == 1) {
    pos[right_begin] = 0.0;
    double edge = a[right_begin];
    for (std::size_t i = right_begin + 1; i < count; ++i) {
      pos[i] = edge + spec.gap + a[i];
      edge = pos[i] + a[i];
    }
    edge = a[right_begin];
    for (std::size_t i = right_begin; i-- > 0;) {
      pos[i] = -(edge + spec.gap + a[i]);
      edge = -pos[i] + a[i];
    }
  } else {
    double edge = 0.5 * spec.gap - spec.gap;
    for (std::size_t i = right_begin; i < count; ++i) {
      pos[i] = edge + spec.gap + a[i];
      edge = pos[i] + a[i];
    }
    edge = 0.5 * spec.gap - spec.gap;
    for (std::size_t i = right_begin; i-- > 0;) {
      pos[i] = -(edge + spec.gap + a[i]);
      edge = -pos[i] + a[i];
    }
  }
  double half_length = 0.0;
  for (std::size_t i = 0; i < count; ++i) half_length = std::max(half_length, std::abs(pos[i]) + a[i]);

  // Depth so the quarter ellipse holds half the arch.
  const double R = spec.arch_radius;
  double lo = 0.2 * R;
  double hi = 20.0 * R;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ArcTable(R, mid).quarter_length() < half_length + 1.0 ? lo : hi) = mid;
  }
  const double depth = std::max(hi, 0.5 * R);
  const ArcTable arc(R, depth);

  std::vector<Tooth> teeth(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double side = pos[i] < 0.0 ? -1.0 : 1.0;
    const double p = arc.phi_at(std::abs(pos[i]));
    Eigen::Vector2d c(side * R * std::cos(p), depth * std::sin(p));
    // d/dp of the right half, negated so it points away from the midline.
    Eigen::Vector2d distal(side * R * std::sin(p), -depth * std::cos(p));
    if (distal.norm() == 0.0) distal = Eigen::Vector2d(side, 0.0);
    distal.normalize();
    Eigen::Vector2d outward(c.x() / (R * R), c.y() / (depth * depth));
    outward -= outward.dot(distal) * distal;
    outward.normalize();
    const double tilt = rng.uniform(-3.0, 3.0) * std::numbers::pi / 180.0;
    const Eigen::Rotation2Dd rot(tilt);
    Tooth& t = teeth[i];
    t.center = c;
    t.distal = rot * distal;
    t.outward = rot * outward;
    t.a = a[i];
    t.b = b[i];
    t.height = kBodyHeight * rng.uniform(0.95, 1.05);
    for (const auto& uv : cusp_layout(scan.cusps_per_tooth[i])) {
      Cusp cusp;
      cusp.t = uv.x() * t.a + rng.uniform(-0.15, 0.15);
      cusp.n = uv.y() * t.b + rng.uniform(-0.15, 0.15);
      cusp.apex = t.body(cusp.t, cusp.n) + kCapHeight;
      t.cusps.push_back(cusp);
    }
  }

  auto height_at = [&](const Eigen::Vector2d& q) {
    double z = 0.0;
    for (const auto& t : teeth) {
      const Eigen::Vector2d tn = t.local(q);
      if (std::abs(tn.x()) > t.a + 6.0 || std::abs(tn.y()) > t.b + 8.0) continue;
      z = std::max(z, t.gum(tn));
      z = std::max(z, t.surface(tn));
    }
    return z;
  };

  // Landmarks.
  auto& gt = scan.ground_truth;
  gt.scan_id = spec.scan_id;
  auto add = [&](const std::string& key, LandmarkClass cls, const Eigen::Vector2d& q, std::optional<double> z = {}) {
    gt.objects.push_back({{key, cls, Vec3(q.x(), q.y(), z ? *z : height_at(q))}, std::nullopt});
  };
  for (std::size_t i = 0; i < count; ++i) {
    const Tooth& t = teeth[i];
    const std::string tag = "t" + std::to_string(i + 1);
    add(tag + "-mesial", LandmarkClass::Mesial, t.world(-0.92 * t.a, 0.0));
    add(tag + "-distal", LandmarkClass::Distal, t.world(0.92 * t.a, 0.0));
    add(tag + "-facial", LandmarkClass::FacialPoint, t.world(0.0, 0.75 * t.b));
    add(tag + "-outer", LandmarkClass::OuterPoint, t.world(0.0, 0.96 * t.b));
    add(tag + "-inner", LandmarkClass::InnerPoint, t.world(0.0, -0.96 * t.b));
    for (std::size_t k = 0; k < t.cusps.size(); ++k) {
      const Eigen::Vector2d q = t.world(t.cusps[k].t, t.cusps[k].n);
      add(tag + "-cusp" + std::to_string(k + 1), LandmarkClass::Cusp, q, std::max(t.cusps[k].apex, height_at(q)));
    }
  }

  // Height-field mesh over the padded footprint.
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const auto& t : teeth) {
    const double r = std::max(t.a, t.b) + 4.0;
    xmin = std::min(xmin, t.center.x() - r);
    xmax = std::max(xmax, t.center.x() + r);
    ymin = std::min(ymin, t.center.y() - r);
    ymax = std::max(ymax, t.center.y() + r);
  }
  const double h = spec.grid_spacing;
  const auto nx = static_cast<std::size_t>(std::ceil((xmax - xmin) / h)) + 1;
  const auto ny = static_cast<std::size_t>(std::ceil((ymax - ymin) / h)) + 1;
  auto& mesh = scan.mesh;
  mesh.vertices.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const Eigen::Vector2d q(xmin + static_cast<double>(i) * h, ymin + static_cast<double>(j) * h);
      mesh.vertices.emplace_back(q.x(), q.y(), height_at(q));
    }
  }
  mesh.faces.reserve(2 * (nx - 1) * (ny - 1));
  for (std::size_t j = 0; j + 1 < ny; ++j) {
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const auto v00 = static_cast<std::uint32_t>(j * nx + i);
      const auto v10 = v00 + 1;
      const auto v01 = static_cast<std::uint32_t>((j + 1) * nx + i);
      const auto v11 = v01 + 1;
      mesh.faces.push_back({v00, v10, v11});
      mesh.faces.push_back({v00, v11, v01});
    }
  }
  return scan;
}

void NoiseSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("noise sigma must be >= 0");
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) throw ValidationError("drop probability must lie in [0, 1]");
  if (!(spurious_rate >= 0.0) || !std::isfinite(spurious_rate)) throw ValidationError("spurious rate must be >= 0");
  if (!(score_overlap >= 0.0 && score_overlap <= 1.0)) throw ValidationError("score overlap must lie in [0, 1]");
}

LandmarkFile perturb(const LandmarkFile& ground_truth, const NoiseSpec& noise, std::uint64_t seed) {
  noise.validate();
  Rng rng(seed);
  LandmarkFile out;
  out.version = ground_truth.version;
  out.scan_id = ground_truth.scan_id;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& o : ground_truth.objects) {
    lo = lo.cwiseMin(o.landmark.position);
    hi = hi.cwiseMax(o.landmark.position);
  }
  if (ground_truth.objects.empty()) {
    lo = Vec3::Constant(-1.0);
    hi = Vec3::Constant(1.0);
  }
  lo -= Vec3::Constant(2.0);
  hi += Vec3::Constant(2.0);

  const double true_lo = 0.5 - 0.5 * noise.score_overlap;
  const double false_hi = 0.5 + 0.5 * noise.score_overlap;
  for (std::size_t i = 0; i < ground_truth.objects.size(); ++i) {
    const Landmark& l = ground_truth.objects[i].landmark;
    const double u = rng.uniform();
    if (u < noise.drop_probability) continue;
    Landmark p = l;
    p.key = "p" + std::to_string(i);
    for (int k = 0; k < 3; ++k) p.position[k] += noise.sigma * rng.normal();
    out.objects.push_back({p, rng.uniform(true_lo, 1.0)});
  }
  const std::uint64_t extra = rng.poisson(noise.spurious_rate);
  for (std::uint64_t j = 0; j < extra; ++j) {
    Landmark p;
    p.key = "s" + std::to_string(j);
    p.cls = kAllClasses[rng.below(kAllClasses.size())];
    for (int k = 0; k < 3; ++k) p.position[k] = rng.uniform(lo[k], hi[k]);
    out.objects.push_back({p, rng.uniform(0.0, false_hi)});
  }
  return out;
}

PointField plant_field(const LandmarkFile& ground_truth, const PlantSpec& spec, std::uint64_t seed) {
  if (spec.points_per_landmark < 1) throw ValidationError("plant_field: need at least one point per landmark");
  if (!(spec.radius > 0.0)) throw ValidationError("plant_field: radius must be positive");
  if (!(spec.noise_sigma >= 0.0)) throw ValidationError("plant_field: noise sigma must be >= 0");
  PointField field;
  field.landmark_class = spec.landmark_class.value_or(LandmarkClass::Cusp);
  std::vector<Vec3> targets;
  for (const auto& o : ground_truth.objects) {
    if (!spec.landmark_class || o.landmark.cls == *spec.landmark_class) targets.push_back(o.landmark.position);
  }
  if (targets.empty()) return field;

  Rng rng(seed);
  for (const auto& t : targets) {
    field.points.push_back(t);
    for (std::size_t k = 1; k < spec.points_per_landmark; ++k) {
      Vec3 dir;
      do {
        dir = Vec3(rng.normal(), rng.normal(), rng.normal());
      } while (dir.norm() < 1e-12);
      dir.normalize();
      const double u = rng.uniform();
      field.points.push_back(t + spec.radius * u * u * dir);
    }
  }
  KdTree tree(targets);
  for (const auto& p : field.points) {
    const auto hit = tree.nearest(p);
    const Vec3& target = targets[hit->index];
    // Reflected rather than clamped: no atom of exact zeros, so no ties.
    const double d = std::abs(std::sqrt(hit->squared_distance) + spec.noise_sigma * rng.normal());
    field.distance.push_back(d);
    field.confidence.push_back(std::exp(-d));
    if (spec.with_offsets) {
      Vec3 o = target - p;
      for (int k = 0; k < 3; ++k) o[k] += spec.noise_sigma * rng.normal();
      field.offset.push_back(o);
    }
  }
  return field;
}

}  // namespace tland
