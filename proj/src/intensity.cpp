#include "cellpp/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cellpp/error.hpp"
#include "cellpp/parallel.hpp"
#include "cellpp/random.hpp"
#include "cellpp/spatial_index.hpp"

namespace cellpp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = 3.14159265358979323846;
constexpr double kAbsentIntensity = 1e-12;
// 1 - exp(-support^2 / 2): Gaussian mass inside the truncation radius
const double kTruncatedMass = 1.0 - std::exp(-0.5 * kKernelSupport * kKernelSupport);

struct Moments {
  double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
};

Moments moments(const Points& p) {
  Moments m;
  m.n = static_cast<double>(p.cols());
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    m.sx += p(0, k);
    m.sy += p(1, k);
    m.sxx += p(0, k) * p(0, k);
    m.syy += p(1, k) * p(1, k);
  }
  return m;
}

Moments operator+(const Moments& a, const Moments& b) {
  return {a.n + b.n, a.sx + b.sx, a.sy + b.sy, a.sxx + b.sxx, a.syy + b.syy};
}

double pooled_sd(const Moments& m) {
  require(m.n >= 2, ErrorCode::DegenerateSpread, "bandwidth rules need at least two points");
  const double vx = (m.sxx - m.sx * m.sx / m.n) / (m.n - 1);
  const double vy = (m.syy - m.sy * m.sy / m.n) / (m.n - 1);
  const double v = 0.5 * (vx + vy);
  const double scale = std::max({std::abs(m.sxx), std::abs(m.syy), 1.0}) / m.n;
  require(v > 1e-14 * scale, ErrorCode::DegenerateSpread, "points have no spread");
  return std::sqrt(v);
}

double bandwidth_from(const Moments& m, BandwidthRule rule) {
  const double base = pooled_sd(m) * std::pow(m.n, -1.0 / 6.0);
  return rule == BandwidthRule::Scott ? base : 1.144 * base;
}

/// Raw kernel sums sum_i k_eps(c - u_i) at every in-window cell centre.
Eigen::MatrixXd raw_grid_sums(const KdTree& tree, const ScalarField& shape, double eps) {
  const GridSpec& g = shape.grid();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(g.nx, g.ny);
  parallel_for(static_cast<std::size_t>(g.ny), [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    for (int i = 0; i < g.nx; ++i) {
      if (!shape.inside(i, j)) continue;
      double s = 0.0;
      tree.for_each_within(g.centre(i, j), kKernelSupport * eps,
                           [&](Eigen::Index, double d2) { s += kernel(d2, eps); });
      out(i, j) = s;
    }
  });
  return out;
}

/// Raw kernel sums from the tree's points at arbitrary locations.
Eigen::VectorXd raw_point_sums(const KdTree& tree, const Points& at, double eps, bool leave_one_out) {
  Eigen::VectorXd out(at.cols());
  parallel_for(static_cast<std::size_t>(at.cols()), [&](std::size_t kk) {
    const auto k = static_cast<Eigen::Index>(kk);
    double s = 0.0;
    tree.for_each_within(at.col(k), kKernelSupport * eps, [&](Eigen::Index idx, double d2) {
      if (!(leave_one_out && idx == k)) s += kernel(d2, eps);
    });
    out(k) = s;
  });
  return out;
}

Eigen::MatrixXd grid_edge_factors(const ScalarField& shape, double eps) {
  const GridSpec& g = shape.grid();
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(g.nx, g.ny, kNaN);
  parallel_for(static_cast<std::size_t>(g.ny), [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    for (int i = 0; i < g.nx; ++i) {
      if (shape.inside(i, j)) out(i, j) = gaussian_mass(shape.window(), g.centre(i, j), eps);
    }
  });
  return out;
}

Eigen::VectorXd point_edge_factors(const Window& window, const Points& at, double eps) {
  Eigen::VectorXd out(at.cols());
  parallel_for(static_cast<std::size_t>(at.cols()), [&](std::size_t k) {
    out(static_cast<Eigen::Index>(k)) = gaussian_mass(window, at.col(static_cast<Eigen::Index>(k)), eps);
  });
  return out;
}

double location_bandwidth(const KernelSpec& spec, double pilot_u) {
  if (!(pilot_u > 0.0)) return spec.max_bandwidth;
  const double n = static_cast<double>(spec.pilot.size());
  return std::min(spec.global_bandwidth / spec.gamma * std::sqrt(n / pilot_u), spec.max_bandwidth);
}

/// Adaptive field on the grid given per-point bandwidths and the pilot field.
ScalarField adaptive_field(const KdTree& tree, const Window& window, const KernelSpec& spec, const GridSpec& grid,
                           const ScalarField& pilot) {
  ScalarField out(window, grid);
  const double reach = kKernelSupport * spec.max_bandwidth;
  parallel_for(static_cast<std::size_t>(grid.ny), [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    for (int i = 0; i < grid.nx; ++i) {
      if (!out.inside(i, j)) continue;
      const Point2 c = grid.centre(i, j);
      double s = 0.0;
      tree.for_each_within(c, reach, [&](Eigen::Index idx, double d2) { s += kernel(d2, spec.bandwidths(idx)); });
      const double e = gaussian_mass(window, c, location_bandwidth(spec, pilot(i, j)));
      out(i, j) = s / e;
    }
  });
  return out;
}

void check_grid_compatible(const ScalarField& pilot, const GridSpec& grid) {
  require(pilot.grid() == grid, ErrorCode::InvalidArgument, "pilot field grid differs from the target grid");
}

}  // namespace

double kernel(double squared_distance, double sigma) {
  const double s2 = sigma * sigma;
  if (squared_distance > kKernelSupport * kKernelSupport * s2) return 0.0;
  return std::exp(-0.5 * squared_distance / s2) / (2.0 * kPi * s2 * kTruncatedMass);
}

double scott_global_bandwidth(const Points& points) { return bandwidth_from(moments(points), BandwidthRule::Scott); }

double terrell_bandwidth(const Points& points) { return bandwidth_from(moments(points), BandwidthRule::Terrell); }

double global_bandwidth(const Points& points, BandwidthRule rule) { return bandwidth_from(moments(points), rule); }

ScalarField fixed_kernel_intensity(const Points& points, const Window& window, double eps, const GridSpec& grid) {
  require(points.cols() > 0, ErrorCode::EmptyPattern, "intensity of an empty pattern");
  require(eps > 0.0, ErrorCode::InvalidArgument, "bandwidth must be positive");
  ScalarField out(window, grid);
  const KdTree tree(points);
  const Eigen::MatrixXd sums = raw_grid_sums(tree, out, eps);
  const Eigen::MatrixXd e = grid_edge_factors(out, eps);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      if (out.inside(i, j)) out(i, j) = sums(i, j) / e(i, j);
    }
  }
  return out;
}

ScalarField fixed_kernel_intensity(const MultitypePattern& pattern, double eps, const GridSpec& grid) {
  return fixed_kernel_intensity(pattern.points, pattern.window, eps, grid);
}

Eigen::VectorXd fixed_intensity_at(const Points& points, const Window& window, double eps, const Points& at,
                                   bool leave_one_out) {
  require(points.cols() > 0, ErrorCode::EmptyPattern, "intensity of an empty pattern");
  require(eps > 0.0, ErrorCode::InvalidArgument, "bandwidth must be positive");
  require(!leave_one_out || at.cols() == points.cols(), ErrorCode::InvalidArgument,
          "leave-one-out evaluation needs the data points as queries");
  const KdTree tree(points);
  return raw_point_sums(tree, at, eps, leave_one_out).cwiseQuotient(point_edge_factors(window, at, eps));
}

KernelSpec adaptive_spec(double eps_star, const Eigen::VectorXd& pilot_at_points) {
  require(eps_star > 0.0, ErrorCode::InvalidArgument, "global bandwidth must be positive");
  const Eigen::Index n = pilot_at_points.size();
  require(n >= 2, ErrorCode::EmptyPattern, "adaptive estimation needs at least two points");
  for (Eigen::Index k = 0; k < n; ++k) {
    require(pilot_at_points(k) > 0.0 && std::isfinite(pilot_at_points(k)), ErrorCode::PilotZero,
            "pilot intensity vanishes at data point " + std::to_string(k));
  }
  KernelSpec spec;
  spec.global_bandwidth = eps_star;
  spec.adaptive = true;
  spec.pilot = pilot_at_points;
  const Eigen::ArrayXd root = (static_cast<double>(n) / pilot_at_points.array()).sqrt();
  spec.gamma = std::exp(root.log().mean());
  spec.bandwidths = (eps_star / spec.gamma) * root.matrix();
  spec.max_bandwidth = spec.bandwidths.maxCoeff();
  return spec;
}

AdaptiveIntensity adaptive_kernel_intensity(const Points& points, const Window& window, double eps_star,
                                            const GridSpec& grid, const ScalarField& pilot,
                                            const Eigen::VectorXd& pilot_at_points) {
  require(points.cols() >= 2, ErrorCode::EmptyPattern, "adaptive estimation needs at least two points");
  require(pilot_at_points.size() == points.cols(), ErrorCode::InvalidArgument, "pilot values do not match points");
  check_grid_compatible(pilot, grid);
  KernelSpec spec = adaptive_spec(eps_star, pilot_at_points);
  const KdTree tree(points);
  return {adaptive_field(tree, window, spec, grid, pilot), std::move(spec)};
}

AdaptiveIntensity adaptive_kernel_intensity(const Points& points, const Window& window, double eps_star,
                                            const GridSpec& grid) {
  require(points.cols() >= 2, ErrorCode::EmptyPattern, "adaptive estimation needs at least two points");
  const ScalarField pilot = fixed_kernel_intensity(points, window, eps_star, grid);
  const Eigen::VectorXd at_points = fixed_intensity_at(points, window, eps_star, points);
  return adaptive_kernel_intensity(points, window, eps_star, grid, pilot, at_points);
}

AdaptiveIntensity adaptive_kernel_intensity(const MultitypePattern& pattern, double eps_star, const GridSpec& grid) {
  return adaptive_kernel_intensity(pattern.points, pattern.window, eps_star, grid);
}

Eigen::VectorXd adaptive_intensity_at_points(const Points& points, const Window& window, const KernelSpec& spec,
                                             bool leave_one_out) {
  require(spec.bandwidths.size() == points.cols(), ErrorCode::InvalidArgument, "kernel spec does not match points");
  const KdTree tree(points);
  Eigen::VectorXd out(points.cols());
  const double reach = kKernelSupport * spec.max_bandwidth;
  parallel_for(static_cast<std::size_t>(points.cols()), [&](std::size_t kk) {
    const auto k = static_cast<Eigen::Index>(kk);
    double s = 0.0;
    tree.for_each_within(points.col(k), reach, [&](Eigen::Index idx, double d2) {
      if (!(leave_one_out && idx == k)) s += kernel(d2, spec.bandwidths(idx));
    });
    out(k) = s / gaussian_mass(window, points.col(k), spec.bandwidths(k));
  });
  return out;
}

TypeProbabilities type_probability_surfaces(const MultitypePattern& pattern, const IntensityConfig& config) {
  require(pattern.size() > 0, ErrorCode::EmptyPattern, "type probabilities of an empty pattern");
  TypeProbabilities out;
  out.levels = pattern.type_levels;
  out.bandwidth = config.bandwidth ? *config.bandwidth : global_bandwidth(pattern.points, config.rule);
  const GridSpec grid = GridSpec::over(pattern.window, config.nx, config.ny);
  const int M = pattern.type_count();
  for (int m = 0; m < M; ++m) {
    const MultitypePattern part = subset(pattern, pattern.indices_of(pattern.type_levels[static_cast<std::size_t>(m)]));
    if (part.size() == 0) {
      ScalarField zero(pattern.window, grid);
      for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
          if (zero.inside(i, j)) zero(i, j) = 0.0;
        }
      }
      out.intensities.push_back(std::move(zero));
    } else if (config.adaptive && part.size() >= 2) {
      out.intensities.push_back(adaptive_kernel_intensity(part, out.bandwidth, grid).field);
    } else {
      out.intensities.push_back(fixed_kernel_intensity(part, out.bandwidth, grid));
    }
  }
  out.probabilities.assign(static_cast<std::size_t>(M), ScalarField(pattern.window, grid));
  out.argmax = Eigen::MatrixXi::Constant(grid.nx, grid.ny, -1);
  Eigen::Index defined = 0;
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      if (!out.probabilities[0].inside(i, j)) continue;
      double total = 0.0;
      for (int m = 0; m < M; ++m) total += out.intensities[static_cast<std::size_t>(m)](i, j);
      if (!(total > 0.0)) continue;
      ++defined;
      double best = -1.0;
      for (int m = 0; m < M; ++m) {
        const double p = out.intensities[static_cast<std::size_t>(m)](i, j) / total;
        out.probabilities[static_cast<std::size_t>(m)](i, j) = p;
        if (p > best) {
          best = p;
          out.argmax(i, j) = m;
        }
      }
    }
  }
  require(defined > 0, ErrorCode::AllZeroDenominator, "total intensity vanishes on the whole grid");
  return out;
}

namespace {

/// Sparse symmetric kernel weights between distinct data points.
struct NeighbourWeights {
  std::vector<Eigen::Index> offset;
  std::vector<Eigen::Index> index;
  std::vector<double> weight;
};

NeighbourWeights neighbour_weights(const Points& points, double eps) {
  const KdTree tree(points);
  NeighbourWeights w;
  w.offset.reserve(static_cast<std::size_t>(points.cols()) + 1);
  w.offset.push_back(0);
  std::vector<std::pair<Eigen::Index, double>> row;
  for (Eigen::Index k = 0; k < points.cols(); ++k) {
    row.clear();
    tree.for_each_within(points.col(k), kKernelSupport * eps, [&](Eigen::Index idx, double d2) {
      if (idx != k) row.emplace_back(idx, kernel(d2, eps));
    });
    std::sort(row.begin(), row.end());
    for (const auto& [idx, v] : row) {
      w.index.push_back(idx);
      w.weight.push_back(v);
    }
    w.offset.push_back(static_cast<Eigen::Index>(w.index.size()));
  }
  return w;
}

double segregation_from_weights(const NeighbourWeights& w, const std::vector<int>& types,
                                const std::vector<double>& expected) {
  const std::size_t M = expected.size();
  std::vector<double> num(M);
  double T = 0.0;
  for (std::size_t k = 0; k + 1 < w.offset.size(); ++k) {
    std::fill(num.begin(), num.end(), 0.0);
    double den = 0.0;
    for (auto e = w.offset[k]; e < w.offset[k + 1]; ++e) {
      const double v = w.weight[static_cast<std::size_t>(e)];
      num[static_cast<std::size_t>(types[static_cast<std::size_t>(w.index[static_cast<std::size_t>(e)])])] += v;
      den += v;
    }
    if (!(den > 0.0)) continue;  // isolated point: no leave-one-out estimate
    for (std::size_t m = 0; m < M; ++m) {
      const double d = num[m] / den - expected[m];
      T += d * d;
    }
  }
  return T;
}

std::vector<double> expected_fractions(const MultitypePattern& pattern) {
  std::vector<double> out;
  const double n = static_cast<double>(pattern.size());
  for (Eigen::Index c : pattern.type_counts()) out.push_back(static_cast<double>(c) / n);
  return out;
}

void check_segregation_input(const MultitypePattern& pattern) {
  require(pattern.type_count() >= 2, ErrorCode::MissingType, "segregation needs at least two types");
  const auto counts = pattern.type_counts();
  for (std::size_t m = 0; m < counts.size(); ++m) {
    require(counts[m] > 0, ErrorCode::MissingType, "type '" + pattern.type_levels[m] + "' has no points");
  }
}

}  // namespace

double segregation_statistic(const MultitypePattern& pattern, double eps) {
  check_segregation_input(pattern);
  return segregation_from_weights(neighbour_weights(pattern.points, eps), pattern.types, expected_fractions(pattern));
}

double bonferroni(double p, int group_size) {
  require(group_size >= 1, ErrorCode::InvalidArgument, "group size must be at least 1");
  return std::min(1.0, p * group_size);
}

SegregationResult segregation_test(const MultitypePattern& pattern, int nsim, std::uint64_t seed, int group_size,
                                   std::optional<double> bandwidth) {
  require(nsim >= 19, ErrorCode::TooFewSimulations, "segregation test needs at least 19 simulations");
  check_segregation_input(pattern);
  SegregationResult out;
  out.seed = seed;
  out.bandwidth = bandwidth ? *bandwidth : scott_global_bandwidth(pattern.points);
  require(out.bandwidth > 0.0, ErrorCode::InvalidArgument, "bandwidth must be positive");
  const NeighbourWeights w = neighbour_weights(pattern.points, out.bandwidth);
  const std::vector<double> expected = expected_fractions(pattern);
  out.statistic = segregation_from_weights(w, pattern.types, expected);
  out.null_statistics.resize(static_cast<std::size_t>(nsim));
  parallel_for(static_cast<std::size_t>(nsim), [&](std::size_t r) {
    Rng rng = Rng::for_replicate(seed, r + 1);
    std::vector<int> labels = pattern.types;
    shuffle(labels.begin(), labels.end(), rng);
    out.null_statistics[r] = segregation_from_weights(w, labels, expected);
  });
  const auto exceed = std::count_if(out.null_statistics.begin(), out.null_statistics.end(),
                                    [&](double t) { return t >= out.statistic; });
  out.p_value = static_cast<double>(1 + exceed) / (nsim + 1);
  out.p_bonferroni = bonferroni(out.p_value, group_size);
  return out;
}

namespace {

/// Everything about a pair of patterns that relabelling leaves unchanged.
struct SharedPilot {
  double eps = 0.0;
  GridSpec grid;
  ScalarField pilot;
  Eigen::VectorXd pilot_i;  // at points of the first pattern
  Eigen::VectorXd pilot_j;
};

SharedPilot shared_pilot(const Points& pi, const Points& pj, const Window& window, const IntensityConfig& config) {
  const double eps = config.bandwidth ? *config.bandwidth : bandwidth_from(moments(pi) + moments(pj), config.rule);
  require(eps > 0.0, ErrorCode::InvalidArgument, "bandwidth must be positive");
  const GridSpec grid = GridSpec::over(window, config.nx, config.ny);
  ScalarField pilot(window, grid);
  const KdTree ti(pi);
  const KdTree tj(pj);
  const Eigen::MatrixXd si = raw_grid_sums(ti, pilot, eps);
  const Eigen::MatrixXd sj = raw_grid_sums(tj, pilot, eps);
  const Eigen::MatrixXd e = grid_edge_factors(pilot, eps);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      if (pilot.inside(i, j)) pilot(i, j) = (si(i, j) + sj(i, j)) / e(i, j);
    }
  }
  // a + b == b + a exactly, so swapping the patterns reproduces every value
  const Eigen::VectorXd at_i = (raw_point_sums(ti, pi, eps, false) + raw_point_sums(tj, pi, eps, false))
                                   .cwiseQuotient(point_edge_factors(window, pi, eps));
  const Eigen::VectorXd at_j = (raw_point_sums(tj, pj, eps, false) + raw_point_sums(ti, pj, eps, false))
                                   .cwiseQuotient(point_edge_factors(window, pj, eps));
  return {eps, grid, std::move(pilot), at_i, at_j};
}

ScalarField field_with_shared_pilot(const Points& points, const Window& window, const SharedPilot& shared,
                                    const Eigen::VectorXd& pilot_at_points) {
  const KernelSpec spec = adaptive_spec(shared.eps, pilot_at_points);
  return adaptive_field(KdTree(points), window, spec, shared.grid, shared.pilot);
}

ScalarField log_risk(const ScalarField& li, const ScalarField& lj, double ni, double nj) {
  ScalarField out(li.window(), li.grid());
  const double count_term = std::log(nj) - std::log(ni);
  for (int j = 0; j < li.grid().ny; ++j) {
    for (int i = 0; i < li.grid().nx; ++i) {
      if (!out.inside(i, j)) continue;
      const double a = li(i, j);
      const double b = lj(i, j);
      if (!(a >= kAbsentIntensity) || !(b >= kAbsentIntensity)) continue;
      out(i, j) = (std::log(a) - std::log(b)) + count_term;
    }
  }
  return out;
}

}  // namespace

RiskSurface relative_risk(const MultitypePattern& pattern_i, const MultitypePattern& pattern_j,
                          const IntensityConfig& config, int nsim, std::uint64_t seed) {
  require(pattern_i.size() >= 2 && pattern_j.size() >= 2, ErrorCode::EmptyPattern,
          "relative risk needs at least two points of each type");
  require(pattern_i.window == pattern_j.window, ErrorCode::InvalidArgument, "relative risk needs a common window");
  require(nsim >= 0, ErrorCode::InvalidArgument, "nsim must be non-negative");
  const Window& window = pattern_i.window;
  const SharedPilot shared = shared_pilot(pattern_i.points, pattern_j.points, window, config);
  const double ni = static_cast<double>(pattern_i.size());
  const double nj = static_cast<double>(pattern_j.size());
  const ScalarField li = field_with_shared_pilot(pattern_i.points, window, shared, shared.pilot_i);
  const ScalarField lj = field_with_shared_pilot(pattern_j.points, window, shared, shared.pilot_j);
  RiskSurface out{log_risk(li, lj, ni, nj), ScalarField(window, shared.grid), 0.05, shared.eps, nsim};
  if (nsim == 0) return out;

  const Eigen::Index n = pattern_i.size() + pattern_j.size();
  Points pooled(2, n);
  pooled << pattern_i.points, pattern_j.points;
  Eigen::VectorXd pooled_pilot(n);
  pooled_pilot << shared.pilot_i, shared.pilot_j;
  const GridSpec& g = shared.grid;
  std::vector<Eigen::MatrixXi> up(static_cast<std::size_t>(nsim));
  std::vector<Eigen::MatrixXi> down(static_cast<std::size_t>(nsim));
  parallel_for(static_cast<std::size_t>(nsim), [&](std::size_t r) {
    Rng rng = Rng::for_replicate(seed, r + 1);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    shuffle(order.begin(), order.end(), rng);
    Points a(2, pattern_i.size());
    Points b(2, pattern_j.size());
    Eigen::VectorXd pa(pattern_i.size());
    Eigen::VectorXd pb(pattern_j.size());
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index src = order[static_cast<std::size_t>(k)];
      if (k < pattern_i.size()) {
        a.col(k) = pooled.col(src);
        pa(k) = pooled_pilot(src);
      } else {
        b.col(k - pattern_i.size()) = pooled.col(src);
        pb(k - pattern_i.size()) = pooled_pilot(src);
      }
    }
    const ScalarField sim = log_risk(field_with_shared_pilot(a, window, shared, pa),
                                     field_with_shared_pilot(b, window, shared, pb), ni, nj);
    Eigen::MatrixXi& u = up[r];
    Eigen::MatrixXi& d = down[r];
    u = Eigen::MatrixXi::Zero(g.nx, g.ny);
    d = Eigen::MatrixXi::Zero(g.nx, g.ny);
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const double obs = out.log_risk(i, j);
        const double s = sim(i, j);
        if (std::isnan(obs) || std::isnan(s)) continue;
        u(i, j) = s >= obs ? 1 : 0;
        d(i, j) = s <= obs ? 1 : 0;
      }
    }
  });
  Eigen::MatrixXi total_up = Eigen::MatrixXi::Zero(g.nx, g.ny);
  Eigen::MatrixXi total_down = Eigen::MatrixXi::Zero(g.nx, g.ny);
  for (int r = 0; r < nsim; ++r) {
    total_up += up[static_cast<std::size_t>(r)];
    total_down += down[static_cast<std::size_t>(r)];
  }
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (std::isnan(out.log_risk(i, j))) continue;
      const int extreme = std::min(total_up(i, j), total_down(i, j));
      out.tolerance(i, j) = std::min(1.0, 2.0 * (1 + extreme) / (nsim + 1));
    }
  }
  return out;
}

namespace {

struct MarkedPoints {
  Points points;
  Eigen::VectorXd marks;
  Eigen::VectorXd log_edge;
  Eigen::Index absent = 0;
};

MarkedPoints marked_points(const MultitypePattern& pattern, const std::string& mark, double eps) {
  require(eps > 0.0, ErrorCode::InvalidArgument, "bandwidth must be positive");
  auto it = pattern.marks.find(mark);
  require(it != pattern.marks.end(), ErrorCode::NoMarkedPoints, "pattern has no mark '" + mark + "'");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < pattern.size(); ++k) {
    if (!std::isnan(it->second(k))) keep.push_back(k);
  }
  require(!keep.empty(), ErrorCode::NoMarkedPoints, "no point carries a value for mark '" + mark + "'");
  MarkedPoints out;
  const auto m = static_cast<Eigen::Index>(keep.size());
  out.points.resize(2, m);
  out.marks.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    out.points.col(k) = pattern.points.col(keep[static_cast<std::size_t>(k)]);
    out.marks(k) = it->second(keep[static_cast<std::size_t>(k)]);
  }
  out.log_edge = point_edge_factors(pattern.window, out.points, eps).array().log();
  out.absent = pattern.size() - m;
  return out;
}

double smooth_at(const MarkedPoints& mp, const Point2& u, double eps) {
  // log-domain weights: the untruncated kernel stays defined far from all cells
  const double inv = 0.5 / (eps * eps);
  double top = -std::numeric_limits<double>::infinity();
  const Eigen::Index n = mp.points.cols();
  Eigen::VectorXd a(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    a(k) = -(mp.points.col(k) - u).squaredNorm() * inv - mp.log_edge(k);
    top = std::max(top, a(k));
  }
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double w = std::exp(a(k) - top);
    num += w * mp.marks(k);
    den += w;
  }
  return num / den;
}

}  // namespace

SmoothedMark nadaraya_watson(const MultitypePattern& pattern, const std::string& mark, double eps,
                             const GridSpec& grid) {
  const MarkedPoints mp = marked_points(pattern, mark, eps);
  SmoothedMark out{ScalarField(pattern.window, grid), mp.points.cols(), mp.absent};
  parallel_for(static_cast<std::size_t>(grid.ny), [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    for (int i = 0; i < grid.nx; ++i) {
      if (out.field.inside(i, j)) out.field(i, j) = smooth_at(mp, grid.centre(i, j), eps);
    }
  });
  return out;
}

Eigen::VectorXd nadaraya_watson_at(const MultitypePattern& pattern, const std::string& mark, double eps,
                                   const Points& at) {
  const MarkedPoints mp = marked_points(pattern, mark, eps);
  Eigen::VectorXd out(at.cols());
  parallel_for(static_cast<std::size_t>(at.cols()), [&](std::size_t k) {
    out(static_cast<Eigen::Index>(k)) = smooth_at(mp, at.col(static_cast<Eigen::Index>(k)), eps);
  });
  return out;
}

}  // namespace cellpp
