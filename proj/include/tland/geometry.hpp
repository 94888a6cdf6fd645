#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tland/common.hpp"
#include "tland/model.hpp"

namespace tland {

using Face = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;  // mm
  std::vector<Face> faces;
  std::vector<Vec3> normals;   // optional, per vertex

  bool operator==(const TriangleMesh&) const = default;
};

struct MeshLoadResult {
  TriangleMesh mesh;
  std::size_t degenerate_faces_dropped = 0;
};

enum class MeshFormat { Obj, PlyAscii, PlyBinary, Stl };

// Dispatches on extension (.obj, .ply, .stl). Throws ValidationError for
// unreadable or unsupported files and for meshes without faces.
MeshLoadResult load_mesh(const std::filesystem::path& path);
MeshLoadResult read_obj(std::string_view text);
MeshLoadResult read_ply(std::string_view bytes);
// Binary STL. Coincident corners are welded by exact coordinate match.
MeshLoadResult read_stl(std::string_view bytes);

std::string write_mesh(const TriangleMesh& mesh, MeshFormat format);
void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format);
MeshFormat mesh_format_from_name(std::string_view name);

struct NormalsResult {
  std::vector<Vec3> normals;  // unit length, zero for isolated vertices
  std::size_t isolated = 0;
};

// Area-weighted average of incident face normals.
NormalsResult vertex_normals(const TriangleMesh& mesh);

// Vertex-to-vertex edges from the faces, each listed once with a < b.
std::vector<std::array<std::uint32_t, 2>> mesh_edges(const TriangleMesh& mesh);

/// Farthest point sampling. The first index is drawn from `seed`; each
/// following index maximizes the distance to the chosen set (lowest index on
/// ties). Throws ValidationError unless 1 <= k <= points.size().
std::vector<std::size_t> fps(std::span<const Vec3> points, std::size_t k, std::uint64_t seed);

struct CurvatureField {
  std::vector<double> values;  // 1/mm, positive where the surface bulges along its normal
  std::size_t clamped = 0;
  std::size_t non_finite = 0;  // replaced by 0
};

inline constexpr double kCurvatureClamp = 100.0;

/// Mean curvature from the cotangent Laplacian over mixed Voronoi areas,
/// H = (L x . n) / 2, clamped to +-kCurvatureClamp.
CurvatureField mean_curvature(const TriangleMesh& mesh);

struct BaselineParams {
  double cusp_radius = 2.0;             // neighbourhood of a cusp peak, mm
  double min_curvature = 0.05;          // 1/mm
  double min_relative_height = 0.35;    // of the mesh height range
  double tooth_height_fraction = 0.3;   // vertices above this form tooth regions
  std::size_t min_tooth_vertices = 20;
  double side_band = 0.35;              // fraction of segment half-length
  double boundary_score = 0.6;
};

/// Curvature/extremum heuristic detector.
///
/// The occlusal axis is the least-variance principal axis of the vertices,
/// pointed so the height distribution has positive skew. Cusps are strict
/// height maxima within cusp_radius on convex, elevated vertices. The
/// elevated region is split into connected segments ordered along the arch;
/// each segment yields facial, inner, outer, mesial and distal candidates at
/// its extremal vertices. Throws ValidationError when the vertices do not
/// span a plane.
LandmarkFile baseline_detect(const TriangleMesh& mesh, const std::string& scan_id,
                             const BaselineParams& params = {});

}  // namespace tland
