#include "tland/matching.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tland/kdtree.hpp"

namespace tland {

HitThreshold::HitThreshold(double tau_mm) : tau_(tau_mm) {
  if (!std::isfinite(tau_mm) || tau_mm < 0.0) {
    throw ValidationError("hit threshold must be finite and non-negative, got " +
                          std::to_string(tau_mm));
  }
}

namespace {

void check_category(std::span<const Prediction> predictions, std::span<const Landmark> references,
                    Category category) {
  for (const auto& p : predictions) {
    if (category_of(p.landmark.cls) != category) {
      throw ValidationError("prediction '" + p.landmark.key + "' is not in category " +
                            std::string(to_string(category)));
    }
  }
  for (const auto& r : references) {
    if (category_of(r.cls) != category) {
      throw ValidationError("reference '" + r.key + "' is not in category " +
                            std::string(to_string(category)));
    }
  }
}

}  // namespace

MatchTable assign(std::span<const Prediction> predictions, std::span<const Landmark> references,
                  Category category, const AssignOptions& options) {
  check_category(predictions, references, category);

  MatchTable table;
  table.category = category;
  table.reference_count = references.size();

  std::vector<Vec3> ref_points;
  ref_points.reserve(references.size());
  for (const auto& r : references) ref_points.push_back(r.position);
  KdTree tree(ref_points);

  const double limit2 = options.max_distance
                            ? *options.max_distance * *options.max_distance
                            : std::numeric_limits<double>::infinity();
  auto nearest = [&](std::size_t p) -> std::optional<KdTree::Hit> {
    auto hit = tree.nearest(predictions[p].landmark.position, limit2);
    if (hit && options.max_distance && !(std::sqrt(hit->squared_distance) < *options.max_distance)) {
      return std::nullopt;
    }
    return hit;
  };

  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].score > predictions[b].score;
  });

  table.rows.reserve(predictions.size());
  std::size_t begin = 0;
  while (begin < order.size()) {
    std::size_t end = begin + 1;
    while (end < order.size() && predictions[order[end]].score == predictions[order[begin]].score) ++end;

    // Within a tie group, repeatedly pick the member closest to its nearest
    // unassigned reference. The group is already in input order.
    std::vector<std::size_t> group(order.begin() + begin, order.begin() + end);
    while (!group.empty()) {
      std::size_t best_slot = 0;
      std::optional<KdTree::Hit> best_hit = nearest(group[0]);
      for (std::size_t s = 1; s < group.size() && best_hit; ++s) {
        auto hit = nearest(group[s]);
        if (hit && hit->squared_distance < best_hit->squared_distance) {
          best_slot = s;
          best_hit = hit;
        }
      }
      if (!best_hit) {
        // group[0] has no candidate; look for any member that does.
        for (std::size_t s = 1; s < group.size(); ++s) {
          auto hit = nearest(group[s]);
          if (hit && (!best_hit || hit->squared_distance < best_hit->squared_distance)) {
            best_slot = s;
            best_hit = hit;
          }
        }
      }
      const std::size_t p = group[best_slot];
      MatchRow row;
      row.prediction = p;
      row.score = predictions[p].score;
      if (best_hit) {
        row.reference = best_hit->index;
        row.distance = std::sqrt(best_hit->squared_distance);
        tree.remove(best_hit->index);
      }
      table.rows.push_back(row);
      group.erase(group.begin() + static_cast<std::ptrdiff_t>(best_slot));
    }
    begin = end;
  }

  for (std::size_t r = 0; r < references.size(); ++r) {
    if (tree.is_alive(r)) table.unmatched_references.push_back(r);
  }
  return table;
}

bool is_hit(const MatchRow& row, HitThreshold tau, HitRule rule) {
  if (!row.distance) return false;
  return rule == HitRule::Strict ? *row.distance < tau.value() : *row.distance <= tau.value();
}

HitCounts hits(const MatchTable& table, HitThreshold tau, HitRule rule) {
  HitCounts out;
  out.flags.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const bool h = is_hit(row, tau, rule);
    out.flags.push_back(h);
    if (h) {
      ++out.true_positives;
    } else {
      ++out.false_positives;
    }
  }
  out.false_negatives = table.reference_count - out.true_positives;
  return out;
}

std::vector<Prediction> select_category(std::span<const Prediction> predictions, Category category) {
  std::vector<Prediction> out;
  for (const auto& p : predictions) {
    if (category_of(p.landmark.cls) == category) out.push_back(p);
  }
  return out;
}

std::vector<Landmark> select_category(std::span<const Landmark> landmarks, Category category) {
  std::vector<Landmark> out;
  for (const auto& l : landmarks) {
    if (category_of(l.cls) == category) out.push_back(l);
  }
  return out;
}

}  // namespace tland
