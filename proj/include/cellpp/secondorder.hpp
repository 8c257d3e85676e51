#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>

#include "cellpp/field.hpp"
#include "cellpp/intensity.hpp"
#include "cellpp/pattern.hpp"

namespace cellpp {

/// A descriptor evaluated on an increasing distance grid. NaN marks values
/// that are undefined at a distance (J where F reaches 1).
struct SummaryFunction {
  std::string name;
  std::string type_i;
  std::string type_j;
  Eigen::VectorXd r;
  Eigen::VectorXd values;
  Eigen::VectorXd theoretical;
  std::string edge_correction;
  std::string intensity_source;

  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
};

enum class EdgeCorrection { Translation, Border, None };
enum class IntensityMode { Constant, Adaptive, Field };
enum class DistanceMode { Homogeneous, Inhomogeneous };

std::string to_string(EdgeCorrection e);
std::string to_string(IntensityMode m);

/// How lambda is plugged in at data points. Keys are type levels; kAnyType
/// stands for the unmarked pattern.
struct IntensityOptions {
  IntensityMode mode = IntensityMode::Adaptive;
  /// Constant mode: overrides of n_m / |W|.
  std::map<std::string, double> constants;
  /// Field mode: intensity surfaces, read bilinearly at data points. A missing
  /// kAnyType field is replaced by the sum of the type fields.
  std::map<std::string, ScalarField> fields;
  /// Adaptive mode: global bandwidth (rule applied to the type's points when unset).
  std::optional<double> bandwidth;
  BandwidthRule rule = BandwidthRule::Scott;
  /// Precomputed values at the points of a level, ordered as indices_of(level);
  /// consulted before any mode.
  std::map<std::string, Eigen::VectorXd> at_points;
};

/// min(cap, a quarter of the shorter bounding-box side).
double default_r0(const Window& window, double cap = 350.0);
/// count equally spaced distances r0/count, ..., r0.
Eigen::VectorXd r_grid(double r0, int count = 513);
Eigen::VectorXd default_r_grid(const Window& window, double cap = 350.0, int count = 513);

/// Intensity at the points of `level` (kAnyType: every point), in the order of
/// indices_of(level). Adaptive estimates are leave-one-out.
Eigen::VectorXd intensity_at_points(const MultitypePattern& pattern, const std::string& level,
                                    const IntensityOptions& options);

/// Inhomogeneous cross K. j = kAnyType gives the dot function.
SummaryFunction kcross_inhom(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                             const Eigen::VectorXd& r, const IntensityOptions& options = {},
                             EdgeCorrection edge = EdgeCorrection::Translation);

/// Reference double loop over all ordered pairs, no spatial index.
SummaryFunction kcross_inhom_naive(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                                   const Eigen::VectorXd& r, const IntensityOptions& options = {},
                                   EdgeCorrection edge = EdgeCorrection::Translation);

/// L = sqrt(K / pi); centred returns L(r) - r.
SummaryFunction l_transform(const SummaryFunction& k, bool centred = false);

/// Epanechnikov half-width 0.15 / sqrt(n / |W|).
double pcf_bandwidth(double n, double area);

SummaryFunction pcf_cross(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                          const Eigen::VectorXd& r, const IntensityOptions& options = {},
                          EdgeCorrection edge = EdgeCorrection::Translation, std::optional<double> bandwidth = {});

struct DistanceOptions {
  DistanceMode mode = DistanceMode::Inhomogeneous;
  IntensityOptions intensity;
  /// Inhomogeneous mode only: drop reference points closer than r_max to the boundary.
  bool border = false;
  /// F query grid resolution over the window bounding box.
  int nx = 128;
  int ny = 128;
};

SummaryFunction gcross(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                       const Eigen::VectorXd& r, const DistanceOptions& options = {});

SummaryFunction fest(const MultitypePattern& pattern, const std::string& j, const Eigen::VectorXd& r,
                     const DistanceOptions& options = {});
/// F from explicit query locations.
SummaryFunction fest(const MultitypePattern& pattern, const std::string& j, const Eigen::VectorXd& r,
                     const Points& queries, const DistanceOptions& options);

/// In-window cell centres of an nx-by-ny grid over the bounding box.
Points query_grid(const Window& window, int nx, int ny);

/// J = (1 - G) / (1 - F), NaN where F >= 1 - 1e-9.
SummaryFunction j_from(const SummaryFunction& g, const SummaryFunction& f);

SummaryFunction jfun(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                     const Eigen::VectorXd& r, const DistanceOptions& options = {});

/// J_i. - J.. ; both share F of the unmarked pattern (pass it to skip recomputation).
SummaryFunction jdot_centred(const MultitypePattern& pattern, const std::string& i, const Eigen::VectorXd& r,
                             const DistanceOptions& options = {}, const SummaryFunction* f_dot = nullptr,
                             const SummaryFunction* j_dotdot = nullptr);

/// Kaplan-Meier CDF of distances d censored at c, on the grid r.
Eigen::VectorXd kaplan_meier_cdf(const Eigen::VectorXd& d, const Eigen::VectorXd& c, const Eigen::VectorXd& r);

}  // namespace cellpp
