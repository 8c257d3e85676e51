#pragma once

#include <limits>
#include <utility>
#include <vector>

#include "cellpp/geometry.hpp"

namespace cellpp {

/// Static 2-d tree over a point set. Radius queries report exactly the points
/// with ||x - u|| <= r.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const Points& points);

  Eigen::Index size() const { return points_.cols(); }
  const Points& points() const { return points_; }

  /// Calls f(index, squared_distance) for every point within distance r of u.
  template <class F>
  void for_each_within(const Point2& u, double r, F&& f) const {
    if (nodes_.empty()) return;
    const double r2 = r * r;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
      if (node.box.squaredExteriorDistance(u) > r2) continue;
      if (node.left < 0) {
        for (int k = node.begin; k < node.end; ++k) {
          const Eigen::Index idx = order_[static_cast<std::size_t>(k)];
          const double d2 = (points_.col(idx) - u).squaredNorm();
          if (d2 <= r2) f(idx, d2);
        }
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
  }

  std::vector<Eigen::Index> query(const Point2& u, double r) const;

  /// Nearest point to u other than `exclude`; index -1 and infinite distance
  /// when no candidate exists.
  std::pair<Eigen::Index, double> nearest(const Point2& u, Eigen::Index exclude = -1) const;

 private:
  struct Node {
    Box2 box;
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
  };
  int build(int begin, int end, int depth);

  Points points_;
  std::vector<Eigen::Index> order_;
  std::vector<Node> nodes_;
};

}  // namespace cellpp
