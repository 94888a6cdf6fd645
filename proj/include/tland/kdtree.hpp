#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "tland/common.hpp"

namespace tland {

/// Static 3-d tree over a point set with lazy removal.
///
/// nearest() is exact. Among equidistant points it returns the lowest index,
/// which is the same rule a linear scan applies, so results match a brute
/// force search bit for bit (squared distances come from squared_distance()).
class KdTree {
 public:
  struct Hit {
    std::size_t index;
    double squared_distance;
  };

  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  std::size_t size() const { return points_.size(); }
  std::size_t alive() const { return nodes_.empty() ? 0 : nodes_[root_].alive; }
  bool is_alive(std::size_t index) const { return alive_[index] != 0; }

  // Marks a point as removed; later queries skip it.
  void remove(std::size_t index);

  // Nearest alive point, optionally restricted to squared distance
  // <= max_squared_distance.
  std::optional<Hit> nearest(const Vec3& query,
                             double max_squared_distance = std::numeric_limits<double>::infinity()) const;

  // All alive points with squared distance <= radius^2, ascending index.
  std::vector<std::size_t> within(const Vec3& query, double radius) const;

 private:
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  struct Node {
    std::uint32_t point;
    std::uint32_t left = kNone;
    std::uint32_t right = kNone;
    std::uint32_t parent = kNone;
    std::uint32_t alive = 0;
    std::uint8_t axis = 0;
  };

  std::uint32_t build(std::vector<std::uint32_t>& order, std::size_t begin, std::size_t end,
                      int depth, std::uint32_t parent);
  void search(std::uint32_t node, const Vec3& q, Hit& best) const;
  void collect(std::uint32_t node, const Vec3& q, double r2, std::vector<std::size_t>& out) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> node_of_point_;
  std::vector<std::uint8_t> alive_;
  std::uint32_t root_ = 0;
};

}  // namespace tland
