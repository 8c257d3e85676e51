#include "cellpp/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cellpp {

namespace {
constexpr int kLeafSize = 12;
}

KdTree::KdTree(const Points& points) : points_(points), order_(static_cast<std::size_t>(points.cols())) {
  std::iota(order_.begin(), order_.end(), Eigen::Index{0});
  if (points_.cols() > 0) {
    nodes_.reserve(static_cast<std::size_t>(2 * points_.cols() / kLeafSize + 2));
    build(0, static_cast<int>(points_.cols()), 0);
  }
}

int KdTree::build(int begin, int end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Box2 box;
  for (int k = begin; k < end; ++k) box.extend(points_.col(order_[static_cast<std::size_t>(k)]));
  nodes_[static_cast<std::size_t>(id)].box = box;
  nodes_[static_cast<std::size_t>(id)].begin = begin;
  nodes_[static_cast<std::size_t>(id)].end = end;
  // depth bound keeps the traversal stack finite for heavily duplicated points
  if (end - begin <= kLeafSize || depth >= 40) return id;
  const Point2 extent = box.sizes();
  const int dim = extent.x() >= extent.y() ? 0 : 1;
  if (extent(dim) <= 0.0) return id;
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](Eigen::Index a, Eigen::Index b) { return points_(dim, a) < points_(dim, b); });
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

std::vector<Eigen::Index> KdTree::query(const Point2& u, double r) const {
  std::vector<Eigen::Index> out;
  for_each_within(u, r, [&](Eigen::Index idx, double) { out.push_back(idx); });
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<Eigen::Index, double> KdTree::nearest(const Point2& u, Eigen::Index exclude) const {
  Eigen::Index best = -1;
  double best2 = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return {best, best2};
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
    if (node.box.squaredExteriorDistance(u) >= best2) continue;
    if (node.left < 0) {
      for (int k = node.begin; k < node.end; ++k) {
        const Eigen::Index idx = order_[static_cast<std::size_t>(k)];
        if (idx == exclude) continue;
        const double d2 = (points_.col(idx) - u).squaredNorm();
        if (d2 < best2 || (d2 == best2 && idx < best)) {
          best2 = d2;
          best = idx;
        }
      }
    } else {
      const Node& l = nodes_[static_cast<std::size_t>(node.left)];
      const Node& r = nodes_[static_cast<std::size_t>(node.right)];
      // visit the nearer child first: push it last
      if (l.box.squaredExteriorDistance(u) <= r.box.squaredExteriorDistance(u)) {
        stack[top++] = node.right;
        stack[top++] = node.left;
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
  }
  return {best, std::sqrt(best2)};
}

}  // namespace cellpp
