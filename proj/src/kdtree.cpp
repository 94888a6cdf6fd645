#include "tland/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace tland {

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  const std::size_t n = points_.size();
  alive_.assign(n, 1);
  node_of_point_.assign(n, kNone);
  nodes_.reserve(n);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  if (n > 0) root_ = build(order, 0, n, 0, kNone);
}

std::uint32_t KdTree::build(std::vector<std::uint32_t>& order, std::size_t begin, std::size_t end,
                            int depth, std::uint32_t parent) {
  const int axis = depth % 3;
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double va = points_[a][axis];
                     const double vb = points_[b][axis];
                     return va < vb || (va == vb && a < b);
                   });
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  Node node;
  node.point = order[mid];
  node.axis = static_cast<std::uint8_t>(axis);
  node.parent = parent;
  node.alive = static_cast<std::uint32_t>(end - begin);
  nodes_.push_back(node);
  node_of_point_[node.point] = id;
  if (mid > begin) {
    const std::uint32_t l = build(order, begin, mid, depth + 1, id);
    nodes_[id].left = l;
  }
  if (mid + 1 < end) {
    const std::uint32_t r = build(order, mid + 1, end, depth + 1, id);
    nodes_[id].right = r;
  }
  return id;
}

void KdTree::remove(std::size_t index) {
  if (index >= alive_.size() || !alive_[index]) return;
  alive_[index] = 0;
  for (std::uint32_t n = node_of_point_[index]; n != kNone; n = nodes_[n].parent) --nodes_[n].alive;
}

std::optional<KdTree::Hit> KdTree::nearest(const Vec3& query, double max_squared_distance) const {
  if (alive() == 0) return std::nullopt;
  Hit best{points_.size(), max_squared_distance};
  search(root_, query, best);
  if (best.index == points_.size()) return std::nullopt;
  return best;
}

void KdTree::search(std::uint32_t id, const Vec3& q, Hit& best) const {
  const Node& node = nodes_[id];
  if (node.alive == 0) return;
  if (alive_[node.point]) {
    const double d2 = squared_distance(q, points_[node.point]);
    if (d2 < best.squared_distance ||
        (d2 == best.squared_distance && node.point < best.index)) {
      best = {node.point, d2};
    }
  }
  const double delta = q[node.axis] - points_[node.point][node.axis];
  const std::uint32_t near = delta <= 0 ? node.left : node.right;
  const std::uint32_t far = delta <= 0 ? node.right : node.left;
  if (near != kNone) search(near, q, best);
  // Equal-distance candidates on the far side may carry a lower index, so
  // prune only when strictly worse.
  if (far != kNone && delta * delta <= best.squared_distance) search(far, q, best);
}

std::vector<std::size_t> KdTree::within(const Vec3& query, double radius) const {
  std::vector<std::size_t> out;
  if (alive() == 0) return out;
  collect(root_, query, radius * radius, out);
  std::sort(out.begin(), out.end());
  return out;
}

void KdTree::collect(std::uint32_t id, const Vec3& q, double r2, std::vector<std::size_t>& out) const {
  const Node& node = nodes_[id];
  if (node.alive == 0) return;
  if (alive_[node.point] && squared_distance(q, points_[node.point]) <= r2) out.push_back(node.point);
  const double delta = q[node.axis] - points_[node.point][node.axis];
  if (node.left != kNone && (delta <= 0 || delta * delta <= r2)) collect(node.left, q, r2, out);
  if (node.right != kNone && (delta >= 0 || delta * delta <= r2)) collect(node.right, q, r2, out);
}

}  // namespace tland
