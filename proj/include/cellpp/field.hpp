#pragma once

#include <ostream>

#include "cellpp/geometry.hpp"

namespace cellpp {

/// Regular nx-by-ny raster of cells over a box; values live at cell centres.
struct GridSpec {
  Box2 box;
  int nx = 128;
  int ny = 128;

  static GridSpec over(const Window& window, int nx = 128, int ny = 128);

  double dx() const { return box.sizes().x() / nx; }
  double dy() const { return box.sizes().y() / ny; }
  double cell_area() const { return dx() * dy(); }
  Point2 centre(int i, int j) const {
    return {box.min().x() + (i + 0.5) * dx(), box.min().y() + (j + 0.5) * dy()};
  }
  bool operator==(const GridSpec& o) const { return box.isApprox(o.box, 0.0) && nx == o.nx && ny == o.ny; }
};

/// Raster surface over a window. values(i, j) belongs to the cell with centre
/// grid.centre(i, j); cells whose centre is outside the window hold NaN, as do
/// cells where the quantity is undefined.
class ScalarField {
 public:
  ScalarField(Window window, GridSpec grid);

  const Window& window() const { return window_; }
  const GridSpec& grid() const { return grid_; }
  Eigen::MatrixXd& values() { return values_; }
  const Eigen::MatrixXd& values() const { return values_; }
  double operator()(int i, int j) const { return values_(i, j); }
  double& operator()(int i, int j) { return values_(i, j); }
  bool inside(int i, int j) const { return inside_(i, j) != 0; }
  const Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic>& inside_mask() const { return inside_; }

  /// Bilinear interpolation between cell centres; NaN neighbours are dropped
  /// and the remaining weights renormalised.
  double at(const Point2& u) const;
  /// Value of the cell containing u (clamped to the grid).
  double cell_value(const Point2& u) const;

  /// Sum of defined in-window values times the cell area.
  double integral() const;
  double max_value() const;
  Eigen::Index defined_count() const;

  /// Field sampled onto another window and grid at u - shift, i.e. the
  /// surface translated by `shift`.
  ScalarField resampled(const Window& target, const GridSpec& grid, const Point2& shift) const;

  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;

 private:
  Window window_;
  GridSpec grid_;
  Eigen::MatrixXd values_;
  Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> inside_;
};

}  // namespace cellpp
