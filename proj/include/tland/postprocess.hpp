#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tland/geometry.hpp"
#include "tland/model.hpp"

namespace tland {

/// Per-point network outputs for one landmark class channel.
struct PointField {
  std::vector<Vec3> points;       // mm
  std::vector<double> confidence; // empty or one per point, in [0, 1]
  std::vector<double> distance;   // empty or one per point, mm, >= 0
  std::vector<Vec3> offset;       // empty or one per point, displacement to the landmark
  LandmarkClass landmark_class = LandmarkClass::Cusp;

  std::size_t size() const { return points.size(); }
  bool has_confidence() const { return !confidence.empty(); }
  bool has_distance() const { return !distance.empty(); }
  bool has_offset() const { return !offset.empty(); }

  // Throws ValidationError on length mismatch or out-of-range channels.
  void validate() const;
};

// CSV with header x,y,z[,conf][,dist][,ox,oy,oz] plus a "# class=<name>"
// comment line.
std::string write_point_field_csv(const PointField& field);
PointField read_point_field_csv(std::string_view text);

/// Undirected vertex graph, symmetric, without self loops.
class MeshGraph {
 public:
  MeshGraph() = default;
  MeshGraph(std::size_t vertex_count, std::span<const std::array<std::uint32_t, 2>> edges);

  static MeshGraph from_mesh(const TriangleMesh& mesh);
  // Connects every pair of points closer than `radius`.
  static MeshGraph radius_graph(std::span<const Vec3> points, double radius);

  std::size_t size() const { return adjacency_.size(); }
  std::span<const std::uint32_t> neighbors(std::size_t v) const { return adjacency_[v]; }

 private:
  std::vector<std::vector<std::uint32_t>> adjacency_;
};

// Points of a density cluster. noise points carry label -1.
struct Clustering {
  std::vector<int> labels;
  int cluster_count = 0;
};

/// DBSCAN where a point is core when the total weight of its eps-neighbourhood
/// (itself included, distance <= eps) reaches min_weight. With unit weights
/// this is classic DBSCAN with min_points = min_weight.
Clustering weighted_dbscan(std::span<const Vec3> points, std::span<const double> weights, double eps,
                           double min_weight);

enum class CoreCriterion {
  WeightSum,  // neighbourhood weight sum >= min_weight
  Count,      // neighbourhood size >= min_weight; weights only used for averaging
};

struct WeightedDbscanParams {
  double d_thresh = 1.0;  // mm
  double eps = 1.0;       // mm
  double min_weight = 1.0;
  CoreCriterion criterion = CoreCriterion::WeightSum;
};

inline constexpr double kDistanceWeightEpsilon = 1e-3;  // mm

/// Distance/offset voting: points with predicted distance below d_thresh move
/// by their offset, are clustered with weights 1 / (distance + 1e-3), and each
/// cluster becomes its weighted mean. Score is exp(-min distance in cluster).
std::vector<Prediction> weighted_dbscan_extract(const PointField& field, const WeightedDbscanParams& params = {});

/// Threshold, then greedy suppression: accepted points suppress any later
/// candidate closer than radius. Offsets are applied first when present.
std::vector<Prediction> confidence_nms(const PointField& field, double conf_thresh, double radius);

/// Threshold, cluster survivors (DBSCAN, min points 1), keep each cluster's
/// most confident point.
std::vector<Prediction> density_cluster_peak(const PointField& field, double conf_thresh = 0.7, double eps = 1.0);

/// Weighted mean with w_i = exp(-|p_i - c|^2 / (2 sigma^2)); c defaults to the
/// plain centroid. Throws ValidationError for an empty cluster or sigma <= 0.
Vec3 gaussian_weighted_vote(std::span<const Vec3> cluster, double sigma,
                            std::optional<Vec3> center_estimate = std::nullopt);

struct GaussianVoteParams {
  double conf_thresh = 0.5;
  double eps = 1.0;
  double sigma = 0.5;
};

/// Cluster-then-vote pipeline: threshold on confidence, displace by offsets
/// when present, DBSCAN (min points 1), Gaussian vote per cluster. Score is
/// the cluster's peak confidence.
std::vector<Prediction> gaussian_vote_extract(const PointField& field, const GaussianVoteParams& params = {});

struct CtdNmsResult {
  std::vector<std::size_t> landmarks;   // one vertex per qualifying plateau
  std::vector<std::size_t> qualifying;  // every vertex that kept its value below the threshold
  bool plateau = false;                 // some qualifying plateau had more than one vertex
  bool converged = false;
  std::size_t iterations = 0;
};

/// Non-minima suppression on a graph: repeat v <- min(v, min over neighbours)
/// until nothing changes or max_iters passes. A vertex qualifies when its
/// value never changed and lies below d_thresh. Connected plateaus of
/// qualifying vertices with equal value collapse to the vertex nearest their
/// centroid (positions optional; without them the lowest index is used).
CtdNmsResult ctd_nms(const MeshGraph& graph, std::span<const double> values, double d_thresh,
                     std::size_t max_iters, std::span<const Vec3> positions = {});

}  // namespace tland
