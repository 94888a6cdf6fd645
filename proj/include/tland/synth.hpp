#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tland/geometry.hpp"
#include "tland/model.hpp"
#include "tland/postprocess.hpp"

namespace tland {

/// Parameters of a synthetic dental arch.
///
/// Teeth sit on the upper half of an ellipse whose half-width is
/// `arch_radius`; the depth is solved so the teeth fit. Tooth type follows
/// the distance from the midline: two incisors, canine, two premolars, then
/// molars. Every tooth carries one mesial, distal, facial, inner and outer
/// point plus its cusps.
struct ArchSpec {
  std::size_t tooth_count = 14;
  double arch_radius = 25.0;  // mm
  // Explicit cusps per tooth (left to right); empty selects by tooth type,
  // molars drawing 3-5 from the seed.
  std::vector<int> cusps_per_tooth;
  double grid_spacing = 0.35;  // mesh resolution, mm
  double gap = 1.0;            // between neighbouring teeth, mm
  std::string scan_id = "synth";

  void validate() const;
};

struct SyntheticScan {
  LandmarkFile ground_truth;
  TriangleMesh mesh;
  std::vector<int> cusps_per_tooth;
};

std::vector<int> resolve_cusp_counts(const ArchSpec& spec, std::uint64_t seed);
SyntheticScan generate_arch(const ArchSpec& spec, std::uint64_t seed);

/// Degradation model for turning ground truth into a prediction set.
///
/// Kept landmarks score U(0.5 - 0.5*overlap, 1); spurious ones score
/// U(0, 0.5 + 0.5*overlap), so overlap = 0 separates them perfectly.
struct NoiseSpec {
  double sigma = 0.0;             // isotropic positional noise, mm
  double drop_probability = 0.0;  // in [0, 1]
  double spurious_rate = 0.0;     // Poisson mean of extra landmarks per scan
  double score_overlap = 0.2;     // in [0, 1]

  void validate() const;
};

LandmarkFile perturb(const LandmarkFile& ground_truth, const NoiseSpec& noise, std::uint64_t seed);

struct PlantSpec {
  std::size_t points_per_landmark = 40;  // including the point at the landmark
  double radius = 1.0;                   // sampling radius around each landmark, mm
  double noise_sigma = 0.0;              // on the distance and offset channels
  bool with_offsets = true;
  // Field for this class only; every landmark of the file when unset.
  std::optional<LandmarkClass> landmark_class;
};

/// Samples points around each landmark, denser towards it (radius R*u^2),
/// including one point exactly on it. Channels: distance to the nearest
/// selected landmark (noisy, reflected at 0), confidence exp(-distance), offset
/// to that landmark (noisy).
PointField plant_field(const LandmarkFile& ground_truth, const PlantSpec& spec, std::uint64_t seed);

}  // namespace tland
