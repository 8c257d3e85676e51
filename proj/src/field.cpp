#include "cellpp/field.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "cellpp/error.hpp"

namespace cellpp {

GridSpec GridSpec::over(const Window& window, int nx, int ny) {
  require(nx >= 2 && ny >= 2, ErrorCode::InvalidArgument, "grid needs at least 2x2 cells");
  return GridSpec{window.bbox(), nx, ny};
}

ScalarField::ScalarField(Window window, GridSpec grid)
    : window_(std::move(window)),
      grid_(grid),
      values_(Eigen::MatrixXd::Constant(grid.nx, grid.ny, std::numeric_limits<double>::quiet_NaN())),
      inside_(grid.nx, grid.ny) {
  require(grid_.nx >= 2 && grid_.ny >= 2, ErrorCode::InvalidArgument, "grid needs at least 2x2 cells");
  for (int j = 0; j < grid_.ny; ++j) {
    for (int i = 0; i < grid_.nx; ++i) inside_(i, j) = window_.contains(grid_.centre(i, j)) ? 1 : 0;
  }
}

double ScalarField::at(const Point2& u) const {
  const double fx = (u.x() - grid_.box.min().x()) / grid_.dx() - 0.5;
  const double fy = (u.y() - grid_.box.min().y()) / grid_.dy() - 0.5;
  const int i0 = std::clamp(static_cast<int>(std::floor(fx)), 0, grid_.nx - 2);
  const int j0 = std::clamp(static_cast<int>(std::floor(fy)), 0, grid_.ny - 2);
  const double tx = std::clamp(fx - i0, 0.0, 1.0);
  const double ty = std::clamp(fy - j0, 0.0, 1.0);
  const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  const double v[4] = {values_(i0, j0), values_(i0 + 1, j0), values_(i0, j0 + 1), values_(i0 + 1, j0 + 1)};
  double num = 0.0;
  double den = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (std::isnan(v[k])) continue;
    num += w[k] * v[k];
    den += w[k];
  }
  if (den > 0.0) return num / den;
  // all weight sits on undefined corners: take any defined corner
  for (int k = 0; k < 4; ++k) {
    if (!std::isnan(v[k])) return v[k];
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ScalarField::cell_value(const Point2& u) const {
  const int i = std::clamp(static_cast<int>(std::floor((u.x() - grid_.box.min().x()) / grid_.dx())), 0, grid_.nx - 1);
  const int j = std::clamp(static_cast<int>(std::floor((u.y() - grid_.box.min().y()) / grid_.dy())), 0, grid_.ny - 1);
  return values_(i, j);
}

double ScalarField::integral() const {
  double s = 0.0;
  for (int j = 0; j < grid_.ny; ++j) {
    for (int i = 0; i < grid_.nx; ++i) {
      if (inside_(i, j) && !std::isnan(values_(i, j))) s += values_(i, j);
    }
  }
  return s * grid_.cell_area();
}

double ScalarField::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < grid_.ny; ++j) {
    for (int i = 0; i < grid_.nx; ++i) {
      if (inside_(i, j) && !std::isnan(values_(i, j))) m = std::max(m, values_(i, j));
    }
  }
  return m;
}

Eigen::Index ScalarField::defined_count() const {
  Eigen::Index c = 0;
  for (int j = 0; j < grid_.ny; ++j) {
    for (int i = 0; i < grid_.nx; ++i) c += (inside_(i, j) && !std::isnan(values_(i, j))) ? 1 : 0;
  }
  return c;
}

ScalarField ScalarField::resampled(const Window& target, const GridSpec& grid, const Point2& shift) const {
  ScalarField out(target, grid);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      if (out.inside(i, j)) out(i, j) = at(grid.centre(i, j) - shift);
    }
  }
  return out;
}

void ScalarField::write_csv(std::ostream& out) const {
  out << "x,y,value,inside\n" << std::setprecision(12);
  for (int j = 0; j < grid_.ny; ++j) {
    for (int i = 0; i < grid_.nx; ++i) {
      const Point2 c = grid_.centre(i, j);
      out << c.x() << ',' << c.y() << ',';
      if (std::isnan(values_(i, j))) {
        out << "NA";
      } else {
        out << values_(i, j);
      }
      out << ',' << int(inside_(i, j)) << '\n';
    }
  }
}

nlohmann::json ScalarField::to_json() const {
  nlohmann::json j;
  j["window"] = window_;
  j["grid"] = {{"xmin", grid_.box.min().x()}, {"ymin", grid_.box.min().y()}, {"xmax", grid_.box.max().x()},
               {"ymax", grid_.box.max().y()}, {"nx", grid_.nx},           {"ny", grid_.ny}};
  nlohmann::json rows = nlohmann::json::array();
  for (int jj = 0; jj < grid_.ny; ++jj) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < grid_.nx; ++i) {
      row.push_back(std::isnan(values_(i, jj)) ? nlohmann::json(nullptr) : nlohmann::json(values_(i, jj)));
    }
    rows.push_back(std::move(row));
  }
  j["values"] = std::move(rows);
  return j;
}

}  // namespace cellpp
