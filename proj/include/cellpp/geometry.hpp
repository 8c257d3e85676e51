#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <json.hpp>

namespace cellpp {

using Point2 = Eigen::Vector2d;
/// Point coordinates stored column-wise: points.col(k) is the k-th location.
using Points = Eigen::Matrix2Xd;
using Box2 = Eigen::AlignedBox2d;

/// Observation window: a simple polygon without holes, stored counter-clockwise.
class Window {
 public:
  /// Accepts either orientation; a repeated closing vertex is dropped.
  /// Throws InvalidWindow for fewer than three vertices, zero area or
  /// self-intersecting boundaries.
  explicit Window(const Points& vertices);

  static Window rectangle(double xmin, double ymin, double xmax, double ymax);
  static Window unit_square() { return rectangle(0.0, 0.0, 1.0, 1.0); }

  const Points& vertices() const { return vertices_; }
  Eigen::Index vertex_count() const { return vertices_.cols(); }
  double area() const { return area_; }
  const Box2& bbox() const { return bbox_; }
  bool is_rectangle() const { return rectangle_; }
  bool is_convex() const { return convex_; }

  /// Boundary points count as inside.
  bool contains(const Point2& u) const;
  /// Distance from u to the nearest boundary edge (no sign).
  double boundary_distance(const Point2& u) const;
  /// Area centroid of the polygon.
  Point2 centroid() const;
  Window translated(const Point2& shift) const;

  bool operator==(const Window& other) const { return vertices_ == other.vertices_; }

 private:
  Points vertices_;
  double area_ = 0.0;
  Box2 bbox_;
  bool rectangle_ = false;
  bool convex_ = false;
};

/// Signed shoelace area (positive for counter-clockwise vertex order).
double signed_area(const Points& vertices);

/// Convex hull vertices in counter-clockwise order, collinear points dropped.
Points convex_hull(const Points& points);

/// Convex hull dilated about its centroid by 1/sqrt(1 - hull_vertices / n).
Window ripley_rasson_window(const Points& points);

/// { u in W : disc(u, radius) inside W }. Convex windows are eroded exactly by
/// offsetting every edge; other windows through a boundary-distance raster.
Window erode(const Window& window, double radius);

struct WindowQuery {
  bool contains;
  double area;
};
WindowQuery window_queries(const Window& window, const Point2& u);

/// Exact area of the intersection of two simple polygons.
double intersection_area(const Window& a, const Window& b);

/// |W intersect (W + shift)|, the set covariance of the window.
double translated_overlap(const Window& window, const Point2& shift);

/// Mass of the isotropic Gaussian N(u, sigma^2 I) falling inside the window.
double gaussian_mass(const Window& window, const Point2& u, double sigma);

void to_json(nlohmann::json& j, const Window& w);
Window window_from_json(const nlohmann::json& j);

}  // namespace cellpp
