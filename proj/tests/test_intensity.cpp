#include <doctest.h>

#include <sstream>

#include "cellpp/error.hpp"
#include "cellpp/field.hpp"
#include "cellpp/intensity.hpp"
#include "cellpp/nullmodels.hpp"
#include "support.hpp"

using namespace cellpp;
using namespace testing;

namespace {

// Gaussian truncated at 4 sigma, renormalised; written out independently.
double oracle_kernel(double d, double s) {
  if (d > 4 * s) return 0.0;
  return std::exp(-d * d / (2 * s * s)) / (2 * M_PI * s * s * (1 - std::exp(-8.0)));
}

double rect_mass(const Box2& b, const Point2& u, double s) {
  return (phi((b.max().x() - u.x()) / s) - phi((b.min().x() - u.x()) / s)) *
         (phi((b.max().y() - u.y()) / s) - phi((b.min().y() - u.y()) / s));
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("scalar field interpolation, integral and resampling") {
  const Window w = Window::rectangle(0, 0, 4, 2);
  const GridSpec g = GridSpec::over(w, 8, 4);
  CHECK(g.dx() == doctest::Approx(0.5));
  CHECK(g.centre(0, 0).isApprox(Point2(0.25, 0.25)));
  ScalarField f(w, g);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) f(i, j) = 2.0 * g.centre(i, j).x() - g.centre(i, j).y();
  }
  // bilinear interpolation reproduces affine functions between centres
  CHECK(f.at({1.1, 0.9}) == doctest::Approx(2.2 - 0.9));
  CHECK(f.cell_value({1.1, 0.9}) == doctest::Approx(2 * 1.25 - 0.75));
  ScalarField one(w, g);
  one.values().setOnes();
  CHECK(one.integral() == doctest::Approx(8.0));
  CHECK(one.defined_count() == 32);
  const ScalarField moved = f.resampled(w, g, {0.5, 0});
  CHECK(moved(3, 1) == doctest::Approx(f(2, 1)));
  // NaN neighbours are dropped and weights renormalised
  f(1, 1) = std::numeric_limits<double>::quiet_NaN();
  const double v = f.at(g.centre(1, 1) + Point2(0.1, 0.1));
  CHECK(std::isfinite(v));
  std::ostringstream csv;
  one.write_csv(csv);
  CHECK(csv.str().rfind("x,y,value,inside\n", 0) == 0);
  CHECK(one.to_json()["values"].size() == 4);
}

TEST_CASE("kernel is a truncated, renormalised Gaussian") {
  const double s = 0.8;
  for (double d : {0.0, 0.3, 1.7, 3.19, 3.21, 5.0}) CHECK(kernel(d * d, s) == doctest::Approx(oracle_kernel(d, s)));
  // midpoint rule in polar coordinates
  double total = 0.0;
  const int steps = 20000;
  for (int k = 0; k < steps; ++k) {
    const double r = (k + 0.5) * 5.0 * s / steps;
    total += kernel(r * r, s) * 2 * M_PI * r * (5.0 * s / steps);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bandwidth rules") {
  Rng rng(31);
  const Points p = uniform_points(rng, 250, Box2(Point2(0, 0), Point2(3, 7)));
  const double mx = p.row(0).mean();
  const double my = p.row(1).mean();
  const double vx = (p.row(0).array() - mx).square().sum() / 249.0;
  const double vy = (p.row(1).array() - my).square().sum() / 249.0;
  const double oracle = std::sqrt(0.5 * (vx + vy)) * std::pow(250.0, -1.0 / 6.0);
  CHECK(scott_global_bandwidth(p) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(terrell_bandwidth(p) == doctest::Approx(1.144 * oracle).epsilon(1e-12));
  Points same = Points::Ones(2, 10);
  CHECK(code_of([&] { scott_global_bandwidth(same); }) == ErrorCode::DegenerateSpread);
}

TEST_CASE("fixed estimator equals the brute-force edge-corrected sum") {
  Rng rng(41);
  const Window w = Window::rectangle(0, 0, 10, 5);
  const Points p = uniform_in(rng, w, 120);
  const double eps = 0.9;
  const Points at = uniform_in(rng, w, 40);
  const Eigen::VectorXd got = fixed_intensity_at(p, w, eps, at);
  const Eigen::VectorXd loo = fixed_intensity_at(p, w, eps, p, true);
  for (Eigen::Index q = 0; q < at.cols(); ++q) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < p.cols(); ++k) s += oracle_kernel((p.col(k) - at.col(q)).norm(), eps);
    CHECK(got(q) == doctest::Approx(s / rect_mass(w.bbox(), at.col(q), eps)).epsilon(1e-10));
  }
  for (Eigen::Index q = 0; q < 20; ++q) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      if (k != q) s += oracle_kernel((p.col(k) - p.col(q)).norm(), eps);
    }
    CHECK(loo(q) == doctest::Approx(s / rect_mass(w.bbox(), p.col(q), eps)).epsilon(1e-10));
  }
  const ScalarField field = fixed_kernel_intensity(p, w, eps, GridSpec::over(w, 64, 32));
  const Point2 c = field.grid().centre(10, 7);
  double s = 0.0;
  for (Eigen::Index k = 0; k < p.cols(); ++k) s += oracle_kernel((p.col(k) - c).norm(), eps);
  CHECK(field(10, 7) == doctest::Approx(s / rect_mass(w.bbox(), c, eps)).epsilon(1e-10));
  CHECK(code_of([&] { fixed_intensity_at(Points(2, 0), w, eps, at); }) == ErrorCode::EmptyPattern);
}

TEST_CASE("adaptive bandwidths have geometric mean equal to the global bandwidth") {
  Rng rng(43);
  const Window w = Window::rectangle(0, 0, 20, 10);
  const MultitypePattern p = simulate_poisson(w, 1.0, 5);
  const double eps = scott_global_bandwidth(p.points);
  const AdaptiveIntensity a = adaptive_kernel_intensity(p, eps, GridSpec::over(w, 40, 20));
  const double geo = std::exp(a.spec.bandwidths.array().log().mean());
  CHECK(geo == doctest::Approx(eps).epsilon(1e-12));
  const Eigen::VectorXd pilot = fixed_intensity_at(p.points, w, eps, p.points);
  for (Eigen::Index k = 0; k < 10; ++k) {
    CHECK(a.spec.bandwidths(k) == doctest::Approx(eps / a.spec.gamma * std::sqrt(p.size() / pilot(k))));
  }
  // leave-one-out values at the points against a direct double loop
  const Eigen::VectorXd at = adaptive_intensity_at_points(p.points, w, a.spec, true);
  for (Eigen::Index q = 0; q < 15; ++q) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (k != q) s += oracle_kernel((p.points.col(k) - p.points.col(q)).norm(), a.spec.bandwidths(k));
    }
    CHECK(at(q) == doctest::Approx(s / rect_mass(w.bbox(), p.points.col(q), a.spec.bandwidths(q))).epsilon(1e-10));
  }
  Eigen::VectorXd zero_pilot = pilot;
  zero_pilot(3) = 0.0;
  CHECK(code_of([&] { adaptive_spec(eps, zero_pilot); }) == ErrorCode::PilotZero);
}

TEST_CASE("property: estimated intensity integrates to about n") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Window w = Window::rectangle(0, 0, 30, 20);
    const MultitypePattern p = simulate_poisson(w, 0.4, seed);
    const double eps = scott_global_bandwidth(p.points);
    const GridSpec g = GridSpec::over(w, 96, 64);
    const double n = static_cast<double>(p.size());
    CHECK(fixed_kernel_intensity(p, eps, g).integral() == doctest::Approx(n).epsilon(0.05));
    CHECK(adaptive_kernel_intensity(p, eps, g).field.integral() == doctest::Approx(n).epsilon(0.05));
  }
}

TEST_CASE("type probabilities sum to one and agree with argmax") {
  Rng rng(47);
  const Window w = Window::rectangle(0, 0, 10, 10);
  MultitypePattern p = random_multitype(rng, w, 300, 3);
  p.type_levels.push_back("empty");
  IntensityConfig cfg;
  cfg.nx = cfg.ny = 40;
  const TypeProbabilities tp = type_probability_surfaces(p, cfg);
  REQUIRE(tp.probabilities.size() == 4);
  CHECK(tp.intensities[3].max_value() == 0.0);
  for (int j = 0; j < 40; ++j) {
    for (int i = 0; i < 40; ++i) {
      double s = 0.0;
      int best = -1;
      double top = -1;
      for (int m = 0; m < 4; ++m) {
        const double v = tp.probabilities[static_cast<std::size_t>(m)](i, j);
        CHECK(v >= 0.0);
        s += v;
        if (v > top) {
          top = v;
          best = m;
        }
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
      CHECK(tp.argmax(i, j) == best);
    }
  }
  CHECK(tp.bandwidth == doctest::Approx(scott_global_bandwidth(p.points)));
}

TEST_CASE("segregation statistic equals the leave-one-out oracle") {
  Rng rng(53);
  const Window w = Window::rectangle(0, 0, 10, 10);
  const MultitypePattern p = random_multitype(rng, w, 150, 3);
  const double eps = 1.1;
  const auto counts = p.type_counts();
  double T = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    double num[3] = {0, 0, 0};
    double den = 0.0;
    for (Eigen::Index l = 0; l < p.size(); ++l) {
      if (l == k) continue;
      const double v = oracle_kernel((p.points.col(l) - p.points.col(k)).norm(), eps);
      num[p.types[static_cast<std::size_t>(l)]] += v;
      den += v;
    }
    if (den <= 0) continue;
    for (int m = 0; m < 3; ++m) {
      const double d = num[m] / den - static_cast<double>(counts[static_cast<std::size_t>(m)]) / p.size();
      T += d * d;
    }
  }
  CHECK(segregation_statistic(p, eps) == doctest::Approx(T).epsilon(1e-12));
}

TEST_CASE("segregation test p-value, reproducibility and Bonferroni") {
  Rng rng(59);
  const Window w = Window::rectangle(0, 0, 10, 10);
  const MultitypePattern seg = segregated_pattern(rng, w, 200, 0.9);
  const SegregationResult a = segregation_test(seg, 99, 4, 3);
  const SegregationResult b = segregation_test(seg, 99, 4, 3);
  CHECK(a.null_statistics == b.null_statistics);
  const auto exceed = std::count_if(a.null_statistics.begin(), a.null_statistics.end(), [&](double t) { return t >= a.statistic; });
  CHECK(a.p_value == doctest::Approx((1.0 + exceed) / 100.0));
  CHECK(a.p_value == doctest::Approx(0.01));
  CHECK(a.p_bonferroni == doctest::Approx(0.03));
  CHECK(bonferroni(0.001, 51) == doctest::Approx(0.051));
  CHECK(bonferroni(0.4, 3) == 1.0);
  CHECK(code_of([&] { segregation_test(seg, 10, 1); }) == ErrorCode::TooFewSimulations);
  CHECK(code_of([&] { segregation_test(restrict(seg, TypeSelector{"a"}), 99, 1); }) == ErrorCode::MissingType);
}

TEST_CASE("log relative risk is exactly antisymmetric") {
  Rng rng(61);
  const Window w = Window::rectangle(0, 0, 10, 10);
  const MultitypePattern seg = segregated_pattern(rng, w, 240, 0.8);
  const MultitypePattern a = restrict(seg, TypeSelector{"a"});
  const MultitypePattern b = restrict(seg, TypeSelector{"b"});
  IntensityConfig cfg;
  cfg.nx = cfg.ny = 32;
  const RiskSurface ab = relative_risk(a, b, cfg, 39, 8);
  const RiskSurface ba = relative_risk(b, a, cfg, 0, 8);
  int defined = 0;
  for (int j = 0; j < 32; ++j) {
    for (int i = 0; i < 32; ++i) {
      if (std::isnan(ab.log_risk(i, j))) continue;
      ++defined;
      CHECK(ab.log_risk(i, j) + ba.log_risk(i, j) == 0.0);
      const double t = ab.tolerance(i, j);
      CHECK(t > 0.0);
      CHECK(t <= 1.0);
    }
  }
  CHECK(defined > 900);
  // type a dominates the left half
  CHECK(ab.log_risk(3, 16) > 0.0);
  CHECK(ab.log_risk(28, 16) < 0.0);
  CHECK(ab.tolerance(3, 16) <= 0.05);
}

TEST_CASE("Nadaraya-Watson smoother") {
  Rng rng(67);
  const Window w = Window::rectangle(0, 0, 10, 10);
  MultitypePattern p = random_multitype(rng, w, 80, 2);
  p.marks["c"] = Eigen::VectorXd::Constant(80, 3.5);
  p.marks["m"] = p.points.row(0).transpose();
  p.marks["m"](5) = std::numeric_limits<double>::quiet_NaN();
  p.marks["none"] = Eigen::VectorXd::Constant(80, std::numeric_limits<double>::quiet_NaN());
  const GridSpec g = GridSpec::over(w, 20, 20);
  const SmoothedMark c = nadaraya_watson(p, "c", 0.7, g);
  for (int j = 0; j < 20; ++j) {
    for (int i = 0; i < 20; ++i) CHECK(c.field(i, j) == doctest::Approx(3.5).epsilon(1e-12));
  }
  const SmoothedMark m = nadaraya_watson(p, "m", 1.3, g);
  CHECK(m.used_points == 79);
  CHECK(m.absent_marks == 1);
  const Point2 u = g.centre(4, 13);
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index k = 0; k < 80; ++k) {
    if (k == 5) continue;
    const double wgt = std::exp(-(p.points.col(k) - u).squaredNorm() / (2 * 1.3 * 1.3)) / rect_mass(w.bbox(), p.points.col(k), 1.3);
    num += wgt * p.marks["m"](k);
    den += wgt;
  }
  CHECK(m.field(4, 13) == doctest::Approx(num / den).epsilon(1e-10));
  Points far(2, 1);
  far << 1e4, 1e4;
  CHECK(std::isfinite(nadaraya_watson_at(p, "m", 0.5, far)(0)));
  CHECK(code_of([&] { nadaraya_watson(p, "none", 1.0, g); }) == ErrorCode::NoMarkedPoints);
  CHECK(code_of([&] { nadaraya_watson(p, "absent", 1.0, g); }) == ErrorCode::NoMarkedPoints);
}
