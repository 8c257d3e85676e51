#pragma once

// Hand-rolled generators for property tests. Everything is driven by the
// library's Rng so failures replay from the seed printed by the test.

#include <cmath>
#include <vector>

#include "cellpp/geometry.hpp"
#include "cellpp/pattern.hpp"
#include "cellpp/random.hpp"

namespace testing {

using namespace cellpp;

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

inline Points uniform_points(Rng& rng, Eigen::Index n, const Box2& box) {
  Points p(2, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    p(0, k) = uniform(rng, box.min().x(), box.max().x());
    p(1, k) = uniform(rng, box.min().y(), box.max().y());
  }
  return p;
}

/// Star-shaped simple polygon around `centre`: sorted angles, radii in [rmin, rmax].
inline Points star_polygon(Rng& rng, int vertices, const Point2& centre, double rmin, double rmax) {
  std::vector<double> angles(static_cast<std::size_t>(vertices));
  for (int k = 0; k < vertices; ++k) {
    angles[static_cast<std::size_t>(k)] = 2.0 * M_PI * (k + 0.2 + 0.6 * rng.uniform()) / vertices;
  }
  Points v(2, vertices);
  for (int k = 0; k < vertices; ++k) {
    const double r = uniform(rng, rmin, rmax);
    v.col(k) = centre + r * Point2(std::cos(angles[static_cast<std::size_t>(k)]), std::sin(angles[static_cast<std::size_t>(k)]));
  }
  return v;
}

/// Convex polygon from the hull of random points on a circle.
inline Window convex_window(Rng& rng, int vertices, const Point2& centre, double radius) {
  Points v(2, vertices);
  for (int k = 0; k < vertices; ++k) {
    const double a = 2.0 * M_PI * rng.uniform();
    v.col(k) = centre + radius * Point2(std::cos(a), std::sin(a));
  }
  return Window(convex_hull(v));
}

/// L-shaped window: [0, a] x [0, b] minus [c, a] x [d, b].
inline Window l_window(double a, double b, double c, double d) {
  Points v(2, 6);
  v << 0, a, a, c, c, 0,  //
      0, 0, d, d, b, b;
  return Window(v);
}

inline Points uniform_in(Rng& rng, const Window& w, Eigen::Index n) {
  Points p(2, n);
  Eigen::Index k = 0;
  while (k < n) {
    const Point2 u(uniform(rng, w.bbox().min().x(), w.bbox().max().x()), uniform(rng, w.bbox().min().y(), w.bbox().max().y()));
    if (w.contains(u)) p.col(k++) = u;
  }
  return p;
}

/// Multitype pattern with uniform locations and independent uniform labels.
inline MultitypePattern random_multitype(Rng& rng, const Window& w, Eigen::Index n, int types) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(types)));
  std::vector<std::string> levels;
  for (int t = 0; t < types; ++t) levels.push_back("t" + std::to_string(t));
  return make_pattern(uniform_in(rng, w, n), std::move(labels), std::move(levels), w);
}

/// Two types on either side of x = mid: the left half holds type 0 with
/// probability `purity`, the right half type 1.
inline MultitypePattern segregated_pattern(Rng& rng, const Window& w, Eigen::Index n, double purity) {
  const Points pts = uniform_in(rng, w, n);
  const double mid = 0.5 * (w.bbox().min().x() + w.bbox().max().x());
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const bool left = pts(0, k) < mid;
    const bool keep = rng.uniform() < purity;
    labels[static_cast<std::size_t>(k)] = (left == keep) ? 0 : 1;
  }
  return make_pattern(pts, std::move(labels), {"a", "b"}, w);
}

/// Standard normal CDF.
inline double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace testing
