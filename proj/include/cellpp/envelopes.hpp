#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cellpp/nullmodels.hpp"
#include "cellpp/secondorder.hpp"

namespace cellpp {

enum class Side { TwoSided, Upper, Lower };
std::string to_string(Side side);
Side parse_side(std::string_view text);

/// Row 0 is the observed curve, rows 1..s the simulations; one column per distance.
struct CurveSet {
  Eigen::VectorXd r;
  Eigen::MatrixXd curves;
  std::string statistic;
};

/// Pointwise ranks per column, ties taking the least extreme rank.
/// Upper: #{k : T_k >= T_i}; lower: #{k : T_k <= T_i}; two-sided: the minimum.
using RankMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
RankMatrix pointwise_ranks(const Eigen::MatrixXd& curves, Side side);

/// E_i = #{j : R_j strictly lexicographically below R_i} / (s + 1), where R_i
/// is curve i's rank vector sorted ascending. NaN columns are dropped.
Eigen::VectorXd erl_measure(const CurveSet& set, Side side = Side::TwoSided);

struct EnvelopeResult {
  std::string statistic;
  double alpha = 0.05;
  Side side = Side::TwoSided;
  int nsim = 0;
  double p_value = 1.0;
  bool rejected = false;
  /// Smallest E among the curves that form the central region.
  double critical_measure = 0.0;
  Eigen::VectorXd erl;
  Eigen::VectorXd r;
  Eigen::VectorXd observed;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd centre;  // pointwise mean of the simulations
  std::vector<char> valid;  // columns used in the ranking
  /// Distances where the observed curve leaves the region; non-empty exactly
  /// when rejected (ties may leave it on the boundary at its most extreme rank).
  std::vector<double> exits;
  std::uint64_t seed = 0;
  nlohmann::json null_spec;

  nlohmann::json to_json() const;
};

/// p = #{i : E_i <= E_0} / (s + 1); central region spanned by the curves with
/// E_i >= k_alpha, k_alpha the largest E with #{E < k_alpha} <= alpha (s + 1).
EnvelopeResult global_envelope_test(const CurveSet& set, double alpha = 0.05, Side side = Side::TwoSided);

enum class Statistic { Kcross, Lcentred, Pcf, Gcross, Fest, J, JdotCentred };
std::string to_string(Statistic s);
Statistic parse_statistic(std::string_view text);

struct StatisticConfig {
  Statistic statistic = Statistic::J;
  std::string i;
  std::string j;
  /// Distance grid; empty means default_r_grid(window, r0_cap).
  Eigen::VectorXd r;
  double r0_cap = 350.0;
  IntensityOptions intensity;
  DistanceMode distance_mode = DistanceMode::Inhomogeneous;
  EdgeCorrection edge = EdgeCorrection::Translation;
  /// Resolution of intensity fields and F query grids.
  int nx = 128;
  int ny = 128;
};

/// Distance grid the configuration resolves to for a pattern; the pcf grid
/// starts at the kernel half-width.
Eigen::VectorXd resolve_r(const StatisticConfig& config, const MultitypePattern& pattern);

SummaryFunction evaluate_statistic(const MultitypePattern& pattern, const StatisticConfig& config,
                                   const Eigen::VectorXd& r);

/// Monte Carlo test of the statistic under the null model; replicate k draws
/// from a stream derived from (seed, k).
EnvelopeResult envelope_from_generator(const MultitypePattern& pattern, const StatisticConfig& config,
                                       const NullSpec& null, int nsim, double alpha = 0.05,
                                       Side side = Side::TwoSided);

/// Curve matrix of the Monte Carlo run, without the test.
CurveSet simulate_curves(const MultitypePattern& pattern, const StatisticConfig& config, const NullSpec& null,
                         int nsim);

}  // namespace cellpp
