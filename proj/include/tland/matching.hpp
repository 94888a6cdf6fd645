#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tland/model.hpp"

namespace tland {

/// Distance threshold for the localization criterion, in millimeters.
/// Zero is allowed and, under the strict rule, never produces a hit.
class HitThreshold {
 public:
  explicit HitThreshold(double tau_mm);
  double value() const { return tau_; }

 private:
  double tau_;
};

enum class HitRule {
  Strict,     // distance < tau
  Inclusive,  // distance <= tau
};

struct MatchRow {
  std::size_t prediction = 0;  // index into the predictions passed to assign()
  double score = 0.0;
  std::optional<std::size_t> reference;
  std::optional<double> distance;  // present iff reference is

  bool operator==(const MatchRow&) const = default;
};

struct MatchTable {
  Category category = Category::Cusps;
  std::vector<MatchRow> rows;  // descending score
  std::vector<std::size_t> unmatched_references;  // ascending
  std::size_t reference_count = 0;

  bool operator==(const MatchTable&) const = default;
};

struct AssignOptions {
  // When set, a prediction may only take a reference closer than this
  // (strictly). The default assigns nearest-unmatched regardless of distance.
  std::optional<double> max_distance;
};

/// Greedy one-to-one assignment within one category.
///
/// Predictions are visited by descending score. Each takes its nearest
/// still-unassigned reference (lowest reference index among equidistant
/// ones). Equal scores are resolved by the smaller distance to the nearest
/// unassigned reference at the time of the choice, then by input order.
/// Throws ValidationError if any input belongs to another category.
MatchTable assign(std::span<const Prediction> predictions, std::span<const Landmark> references,
                  Category category, const AssignOptions& options = {});

struct HitCounts {
  std::vector<bool> flags;  // table row order
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  // References not detected: unassigned ones plus those assigned at a
  // distance that fails the criterion.
  std::size_t false_negatives = 0;
};

bool is_hit(const MatchRow& row, HitThreshold tau, HitRule rule = HitRule::Strict);
HitCounts hits(const MatchTable& table, HitThreshold tau, HitRule rule = HitRule::Strict);

std::vector<Prediction> select_category(std::span<const Prediction> predictions, Category category);
std::vector<Landmark> select_category(std::span<const Landmark> landmarks, Category category);

}  // namespace tland
