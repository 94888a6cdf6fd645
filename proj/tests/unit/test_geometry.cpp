#include <doctest.h>

#include <Eigen/Geometry>
#include <algorithm>
#include <filesystem>

#include "meshes.hpp"
#include "tland/geometry.hpp"
#include "tland/matching.hpp"
#include "tland/rng.hpp"
#include "tland/synth.hpp"

using namespace tland;

namespace {

double min_pairwise(std::span<const Vec3> pts, const std::vector<std::size_t>& idx) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) best = std::min(best, distance(pts[idx[a]], pts[idx[b]]));
  }
  return best;
}

}  // namespace

TEST_CASE("OBJ tetrahedron with slashes and negative indices") {
  const char* obj =
      "# tet\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvn 0 0 1\n"
      "f 1//1 3//1 2//1\nf 1/1 2/1 4/1\nf -4 -1 -2\nf 2 3 4\n";
  const MeshLoadResult r = read_obj(obj);
  CHECK(r.mesh.vertices.size() == 4);
  CHECK(r.mesh.faces.size() == 4);
  CHECK(r.degenerate_faces_dropped == 0);
  CHECK_THROWS_AS(read_obj("v 0 0 0\nf 1 2 3\n"), ValidationError);
}

TEST_CASE("OBJ polygons are fan triangulated") {
  const MeshLoadResult r = read_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  CHECK(r.mesh.faces.size() == 2);
}

TEST_CASE("PLY ascii drops a degenerate face") {
  const char* ply =
      "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
      "element face 3\nproperty list uchar int vertex_indices\nend_header\n"
      "0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 1 3\n3 1 1 2\n";
  const MeshLoadResult r = read_ply(ply);
  CHECK(r.mesh.vertices.size() == 4);
  CHECK(r.mesh.faces.size() == 2);
  CHECK(r.degenerate_faces_dropped == 1);
}

TEST_CASE("mesh writers round trip") {
  const TriangleMesh m = testmesh::icosphere(2, 3.0);
  for (MeshFormat f : {MeshFormat::Obj, MeshFormat::PlyAscii, MeshFormat::PlyBinary}) {
    const std::string bytes = write_mesh(m, f);
    const MeshLoadResult r = f == MeshFormat::Obj ? read_obj(bytes) : read_ply(bytes);
    CHECK(r.mesh.vertices.size() == m.vertices.size());
    CHECK(r.mesh.faces == m.faces);
  }
  const std::string stl = write_mesh(m, MeshFormat::Stl);
  const MeshLoadResult r = read_stl(stl);
  CHECK(r.mesh.faces.size() == m.faces.size());
  CHECK(r.mesh.vertices.size() == testmesh::stl_distinct_vertices(stl));
  CHECK(r.mesh.vertices.size() == m.vertices.size());
}

TEST_CASE("load_mesh dispatches on extension") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "tland_test_mesh";
  fs::create_directories(dir);
  const TriangleMesh m = testmesh::tetrahedron();
  save_mesh(m, dir / "t.obj", MeshFormat::Obj);
  save_mesh(m, dir / "t.stl", MeshFormat::Stl);
  save_mesh(m, dir / "t.ply", MeshFormat::PlyBinary);
  for (const char* name : {"t.obj", "t.stl", "t.ply"}) CHECK(load_mesh(dir / name).mesh.faces.size() == 4);
  CHECK_THROWS_AS(load_mesh(dir / "missing.obj"), ValidationError);
  CHECK_THROWS_AS(load_mesh(dir / "t.off"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("vertex normals") {
  const NormalsResult plane = vertex_normals(testmesh::plane_grid(3));
  for (const auto& n : plane.normals) CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-12);

  const TriangleMesh sphere = testmesh::icosphere(3, 1.0);
  const NormalsResult sn = vertex_normals(sphere);
  for (std::size_t i = 0; i < sphere.vertices.size(); ++i) CHECK(sn.normals[i].dot(sphere.vertices[i].normalized()) > 0.99);

  const NormalsResult tn = vertex_normals(testmesh::tetrahedron());
  for (const auto& n : tn.normals) CHECK(std::abs(n.norm() - 1.0) < 1e-12);

  TriangleMesh extra = testmesh::tetrahedron();
  extra.vertices.emplace_back(5, 5, 5);
  const NormalsResult iso = vertex_normals(extra);
  CHECK(iso.isolated == 1);
  CHECK(iso.normals.back() == Vec3::Zero());
}

TEST_CASE("mean curvature of sphere, plane and cylinder") {
  for (double r : {1.0, 4.0}) {
    const TriangleMesh sphere = testmesh::icosphere(4, r);
    const CurvatureField h = mean_curvature(sphere);
    for (double v : h.values) CHECK(std::abs(v - 1.0 / r) < 0.1 / r);
  }
  const CurvatureField p = mean_curvature(testmesh::plane_grid(8, 0.5));
  for (double v : p.values) CHECK(std::abs(v) < 1e-6);

  const double r = 2.0;
  const TriangleMesh cyl = testmesh::cylinder(r, 10.0, 64, 40);
  const CurvatureField c = mean_curvature(cyl);
  for (std::size_t i = 0; i < cyl.vertices.size(); ++i) {
    const double z = cyl.vertices[i].z();
    if (z < 2.0 || z > 8.0) continue;
    CHECK(std::abs(c.values[i] - 1.0 / (2 * r)) < 0.15 / (2 * r));
  }
}

TEST_CASE("curvature is invariant under rigid motion") {
  TriangleMesh m = generate_arch({4, 12.0, {}, 0.5}, 3).mesh;
  const CurvatureField before = mean_curvature(m);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  for (auto& v : m.vertices) v = rot * v + Vec3(5, -3, 2);
  const CurvatureField after = mean_curvature(m);
  double worst = 0.0;
  for (std::size_t i = 0; i < before.values.size(); ++i) worst = std::max(worst, std::abs(before.values[i] - after.values[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("fps basics") {
  const std::vector<Vec3> seg = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto idx = fps(seg, 2, seed);
    // Starting at the midpoint the second pick is endpoint 0; otherwise the
    // two endpoints are taken.
    if (idx[0] != 1) {
      std::sort(idx.begin(), idx.end());
      CHECK(idx == std::vector<std::size_t>{0, 2});
    }
  }
  auto all = fps(seg, 3, 1);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(fps(seg, 4, 0), ValidationError);
  CHECK_THROWS_AS(fps(seg, 0, 0), ValidationError);
}

TEST_CASE("fps is deterministic and beats random sampling") {
  Rng rng(8);
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 400; ++i) pts.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    const auto a = fps(pts, 20, static_cast<std::uint64_t>(trial));
    CHECK(a == fps(pts, 20, static_cast<std::uint64_t>(trial)));
    const double f = min_pairwise(pts, a);
    std::vector<std::size_t> perm(pts.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = 0; i < 20; ++i) std::swap(perm[i], perm[i + rng.below(perm.size() - i)]);
    perm.resize(20);
    if (f >= min_pairwise(pts, perm)) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("baseline on a flat plane finds no cusps") {
  const LandmarkFile f = baseline_detect(testmesh::plane_grid(20, 0.5), "plane");
  for (const auto& o : f.objects) CHECK(o.landmark.cls != LandmarkClass::Cusp);
  TriangleMesh line;
  line.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  line.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(baseline_detect(line, "line"), ValidationError);
}

TEST_CASE("baseline on synthetic arches") {
  std::size_t found = 0;
  std::size_t planted = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SyntheticScan scan = generate_arch({}, seed);
    const LandmarkFile det = baseline_detect(scan.mesh, "s");
    CHECK_NOTHROW(parse_predictions(write_landmark_file(det)));
    for (const auto& o : det.objects) {
      CHECK(is_finite(o.landmark.position));
      CHECK(*o.score >= 0.0);
      CHECK(*o.score <= 1.0);
    }
    const auto refs = select_category(std::span<const Landmark>(scan.ground_truth.landmarks()), Category::Cusps);
    const auto preds = det.predictions();
    const MatchTable t = assign(select_category(preds, Category::Cusps), refs, Category::Cusps);
    found += hits(t, HitThreshold(1.5)).true_positives;
    planted += refs.size();
  }
  CHECK(static_cast<double>(found) >= 0.8 * static_cast<double>(planted));
}
