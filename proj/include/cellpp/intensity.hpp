#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cellpp/field.hpp"
#include "cellpp/pattern.hpp"

namespace cellpp {

enum class BandwidthRule { Scott, Terrell };

/// n^(-1/6) * sqrt((var x + var y) / 2).
double scott_global_bandwidth(const Points& points);
/// Oversmoothing rule 1.144 * sd * n^(-1/6), sd the pooled isotropic deviation.
double terrell_bandwidth(const Points& points);
double global_bandwidth(const Points& points, BandwidthRule rule);

/// Isotropic Gaussian truncated at 4 sigma and renormalised to unit mass.
double kernel(double squared_distance, double sigma);
inline constexpr double kKernelSupport = 4.0;

struct KernelSpec {
  double global_bandwidth = 0.0;
  bool adaptive = false;
  double gamma = 1.0;
  /// Pilot intensity at each data point (adaptive only).
  Eigen::VectorXd pilot;
  /// Bandwidth attached to each data point; constant for fixed kernels.
  Eigen::VectorXd bandwidths;
  /// Location bandwidth h(u) = (eps/gamma) sqrt(n / pilot(u)) is capped here.
  double max_bandwidth = 0.0;
};

/// lambda(u) = e(u)^-1 sum_i k_eps(u - u_i) on the grid.
ScalarField fixed_kernel_intensity(const Points& points, const Window& window, double eps, const GridSpec& grid);
ScalarField fixed_kernel_intensity(const MultitypePattern& pattern, double eps, const GridSpec& grid);

/// Fixed-bandwidth estimate at arbitrary locations. With leave_one_out the
/// queries must be the data points themselves and point k skips itself.
Eigen::VectorXd fixed_intensity_at(const Points& points, const Window& window, double eps, const Points& at,
                                   bool leave_one_out = false);

struct AdaptiveIntensity {
  ScalarField field;
  KernelSpec spec;
};

/// Adaptive estimator with pilot = fixed estimate at eps_star.
AdaptiveIntensity adaptive_kernel_intensity(const Points& points, const Window& window, double eps_star,
                                            const GridSpec& grid);
AdaptiveIntensity adaptive_kernel_intensity(const MultitypePattern& pattern, double eps_star, const GridSpec& grid);
/// Adaptive estimator with a pilot supplied on the grid and at the data points.
AdaptiveIntensity adaptive_kernel_intensity(const Points& points, const Window& window, double eps_star,
                                            const GridSpec& grid, const ScalarField& pilot,
                                            const Eigen::VectorXd& pilot_at_points);

/// Per-point bandwidths and gamma from a pilot evaluated at the data points.
KernelSpec adaptive_spec(double eps_star, const Eigen::VectorXd& pilot_at_points);

/// Adaptive estimate at the data points, optionally leave-one-out.
Eigen::VectorXd adaptive_intensity_at_points(const Points& points, const Window& window, const KernelSpec& spec,
                                             bool leave_one_out);

struct IntensityConfig {
  bool adaptive = true;
  /// Global bandwidth; chosen by `rule` from the unmarked pattern when unset.
  std::optional<double> bandwidth;
  BandwidthRule rule = BandwidthRule::Scott;
  int nx = 128;
  int ny = 128;
};

struct TypeProbabilities {
  std::vector<std::string> levels;
  std::vector<ScalarField> intensities;
  std::vector<ScalarField> probabilities;
  /// Index of the most probable type per cell, -1 where undefined.
  Eigen::MatrixXi argmax;
  double bandwidth = 0.0;
};

/// p(m|u) = lambda_m(u) / sum_k lambda_k(u), one shared global bandwidth.
TypeProbabilities type_probability_surfaces(const MultitypePattern& pattern, const IntensityConfig& config);

struct SegregationResult {
  double statistic = 0.0;
  std::vector<double> null_statistics;
  double p_value = 1.0;
  double p_bonferroni = 1.0;
  double bandwidth = 0.0;
  std::uint64_t seed = 0;
};

/// Segregation statistic with leave-one-out type probabilities at the data
/// points for the given labels.
double segregation_statistic(const MultitypePattern& pattern, double eps);

SegregationResult segregation_test(const MultitypePattern& pattern, int nsim, std::uint64_t seed, int group_size = 1,
                                   std::optional<double> bandwidth = std::nullopt);

double bonferroni(double p, int group_size);

struct RiskSurface {
  ScalarField log_risk;
  /// Two-sided pointwise Monte Carlo p-values; NaN where rho is undefined.
  ScalarField tolerance;
  double contour_level = 0.05;
  double bandwidth = 0.0;
  int nsim = 0;
};

/// rho_ij(u) = log(lambda_i / lambda_j) + log(n_j / n_i) with shared global
/// bandwidth and shared pilot. nsim = 0 skips the tolerance surface.
RiskSurface relative_risk(const MultitypePattern& pattern_i, const MultitypePattern& pattern_j,
                          const IntensityConfig& config, int nsim, std::uint64_t seed);

struct SmoothedMark {
  ScalarField field;
  Eigen::Index used_points = 0;
  Eigen::Index absent_marks = 0;
};

/// Nadaraya-Watson smoother with weights k_eps(u - u_i) / e(u_i); points with
/// absent marks are skipped.
SmoothedMark nadaraya_watson(const MultitypePattern& pattern, const std::string& mark, double eps,
                             const GridSpec& grid);
/// The same smoother evaluated at arbitrary locations.
Eigen::VectorXd nadaraya_watson_at(const MultitypePattern& pattern, const std::string& mark, double eps,
                                   const Points& at);

}  // namespace cellpp
