#include <doctest.h>

#include <sstream>

#include "cellpp/error.hpp"
#include "cellpp/nullmodels.hpp"
#include "cellpp/secondorder.hpp"
#include "support.hpp"

using namespace cellpp;
using namespace testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

// Translation-corrected cross K with constant intensities on a rectangle [0,a]x[0,b].
Eigen::VectorXd k_oracle(const MultitypePattern& p, int ti, int tj, double a, double b, const Eigen::VectorXd& r) {
  const double area = a * b;
  const auto counts = p.type_counts();
  const double li = counts[static_cast<std::size_t>(ti)] / area;
  const double lj = counts[static_cast<std::size_t>(tj)] / area;
  Eigen::VectorXd k = Eigen::VectorXd::Zero(r.size());
  for (Eigen::Index u = 0; u < p.size(); ++u) {
    if (p.types[static_cast<std::size_t>(u)] != ti) continue;
    for (Eigen::Index v = 0; v < p.size(); ++v) {
      if (v == u || p.types[static_cast<std::size_t>(v)] != tj) continue;
      const Point2 d = p.points.col(v) - p.points.col(u);
      const double w = area / ((a - std::abs(d.x())) * (b - std::abs(d.y())));
      for (Eigen::Index m = 0; m < r.size(); ++m) {
        if (d.norm() <= r(m)) k(m) += w / (li * lj);
      }
    }
  }
  return k / area;
}

// 1 - mean over references of the product of (1 - lbar / lambda) over partners within r.
Eigen::VectorXd g_oracle(const Points& refs, const Points& partners, const Eigen::VectorXd& lambda,
                         const std::vector<Eigen::Index>& self, const Eigen::VectorXd& r) {
  const double lbar = lambda.minCoeff();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(r.size());
  for (Eigen::Index m = 0; m < r.size(); ++m) {
    double s = 0.0;
    for (Eigen::Index q = 0; q < refs.cols(); ++q) {
      double prod = 1.0;
      for (Eigen::Index k = 0; k < partners.cols(); ++k) {
        if (!self.empty() && self[static_cast<std::size_t>(q)] == k) continue;
        if ((partners.col(k) - refs.col(q)).norm() <= r(m)) prod *= 1.0 - lbar / lambda(k);
      }
      s += prod;
    }
    g(m) = 1.0 - s / refs.cols();
  }
  return g;
}

}  // namespace

TEST_CASE("distance grid defaults") {
  CHECK(default_r0(Window::rectangle(0, 0, 1000, 2000)) == 250.0);
  CHECK(default_r0(Window::rectangle(0, 0, 4000, 2000)) == 350.0);
  const Eigen::VectorXd r = r_grid(2.0, 4);
  CHECK(r(0) == 0.5);
  CHECK(r(3) == 2.0);
  CHECK(default_r_grid(Window::unit_square()).size() == 513);
}

TEST_CASE("cross K equals the translation-corrected double sum") {
  Rng rng(71);
  const double a = 8.0;
  const double b = 5.0;
  const Window w = Window::rectangle(0, 0, a, b);
  const MultitypePattern p = random_multitype(rng, w, 160, 2);
  const Eigen::VectorXd r = r_grid(1.2, 24);
  IntensityOptions c;
  c.mode = IntensityMode::Constant;
  const SummaryFunction kc = kcross_inhom(p, "t0", "t1", r, c);
  const Eigen::VectorXd want = k_oracle(p, 0, 1, a, b, r);
  for (Eigen::Index m = 0; m < r.size(); ++m) CHECK(kc.values(m) == doctest::Approx(want(m)).epsilon(1e-11));
  CHECK(kc.name == "Kcross");
  CHECK(kc.theoretical(5) == doctest::Approx(M_PI * r(5) * r(5)));
  const SummaryFunction kk = kcross_inhom(p, "t0", "t0", r, c);
  const Eigen::VectorXd want_kk = k_oracle(p, 0, 0, a, b, r);
  for (Eigen::Index m = 0; m < r.size(); ++m) CHECK(kk.values(m) == doctest::Approx(want_kk(m)).epsilon(1e-11));
}

TEST_CASE("property: indexed K matches the naive double loop") {
  Rng rng(73);
  for (int trial = 0; trial < 12; ++trial) {
    const Window w = trial % 2 == 0 ? Window::rectangle(0, 0, 10, 6) : Window(star_polygon(rng, 9, {0, 0}, 4, 7));
    const MultitypePattern p = random_multitype(rng, w, 40 + static_cast<Eigen::Index>(rng.below(120)), 3);
    const Eigen::VectorXd r = r_grid(2.0, 17);
    IntensityOptions opts;
    opts.mode = trial % 3 == 0 ? IntensityMode::Constant : IntensityMode::Adaptive;
    for (EdgeCorrection e : {EdgeCorrection::Translation, EdgeCorrection::Border, EdgeCorrection::None}) {
      for (const auto& [i, j] : std::vector<std::pair<std::string, std::string>>{{"t0", "t1"}, {"t2", "."}, {".", "."}}) {
        CAPTURE(trial);
        const SummaryFunction fast = kcross_inhom(p, i, j, r, opts, e);
        const SummaryFunction slow = kcross_inhom_naive(p, i, j, r, opts, e);
        for (Eigen::Index m = 0; m < r.size(); ++m) {
          if (std::isnan(slow.values(m))) {
            CHECK(std::isnan(fast.values(m)));
          } else {
            CHECK(std::abs(fast.values(m) - slow.values(m)) <= 1e-12 * std::max(1.0, std::abs(slow.values(m))));
          }
        }
      }
    }
  }
}

TEST_CASE("L transform and CSV output") {
  SummaryFunction k;
  k.name = "K";
  k.r = Eigen::Vector2d(1, 2);
  k.values = Eigen::Vector2d(M_PI * 4, M_PI * 4);
  k.theoretical = M_PI * k.r.array().square();
  const SummaryFunction l = l_transform(k);
  CHECK(l.values(0) == doctest::Approx(2.0));
  CHECK(l.theoretical(1) == doctest::Approx(2.0));
  const SummaryFunction lc = l_transform(k, true);
  CHECK(lc.values(0) == doctest::Approx(1.0));
  CHECK(lc.values(1) == doctest::Approx(0.0));
  CHECK(lc.theoretical(0) == doctest::Approx(0.0));
  std::ostringstream out;
  l.write_csv(out);
  CHECK(out.str().rfind("r,value,theoretical\n1,2,", 0) == 0);
}

TEST_CASE("pair correlation equals the Epanechnikov double sum") {
  Rng rng(79);
  const double a = 6.0;
  const double b = 6.0;
  const Window w = Window::rectangle(0, 0, a, b);
  const MultitypePattern p = random_multitype(rng, w, 150, 1);
  const double bw = pcf_bandwidth(150, 36);
  CHECK(bw == doctest::Approx(0.15 / std::sqrt(150.0 / 36.0)));
  const Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(20, bw, 1.5);
  IntensityOptions c;
  c.mode = IntensityMode::Constant;
  const SummaryFunction g = pcf_cross(p, "t0", "t0", r, c);
  const double lam = 150.0 / 36.0;
  for (Eigen::Index m = 0; m < r.size(); ++m) {
    double s = 0.0;
    for (Eigen::Index u = 0; u < 150; ++u) {
      for (Eigen::Index v = 0; v < 150; ++v) {
        if (u == v) continue;
        const Point2 d = p.points.col(v) - p.points.col(u);
        const double t = (r(m) - d.norm()) / bw;
        if (std::abs(t) > 1) continue;
        s += 0.75 / bw * (1 - t * t) * 36.0 / ((a - std::abs(d.x())) * (b - std::abs(d.y()))) / (lam * lam);
      }
    }
    CHECK(g.values(m) == doctest::Approx(s / (2 * M_PI * r(m) * 36.0)).epsilon(1e-11));
  }
  CHECK(code_of([&] { pcf_cross(p, "t0", "t0", r_grid(1.0, 50), c); }) == ErrorCode::BandwidthTooSmall);
  CHECK(code_of([&] { pcf_cross(p, "t0", "t0", r, c, EdgeCorrection::Border); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("Kaplan-Meier CDF") {
  const Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(6, 0.5, 3.0);
  // no censoring: the empirical CDF
  Eigen::VectorXd d(4);
  d << 1.0, 2.0, 2.0, 3.0;
  const Eigen::VectorXd big = Eigen::VectorXd::Constant(4, 10.0);
  const Eigen::VectorXd e = kaplan_meier_cdf(d, big, r);
  CHECK(e(0) == 0.0);
  CHECK(e(1) == doctest::Approx(0.25));
  CHECK(e(3) == doctest::Approx(0.75));
  CHECK(e(5) == doctest::Approx(1.0));
  // censored at 1.5 for the second observation: S(1) = 3/4, S(2) = 3/4 * (1 - 1/2)
  Eigen::VectorXd c(4);
  c << 10.0, 1.5, 10.0, 10.0;
  d << 1.0, 2.5, 2.0, 3.0;
  const Eigen::VectorXd k = kaplan_meier_cdf(d, c, r);
  CHECK(k(1) == doctest::Approx(0.25));
  CHECK(k(3) == doctest::Approx(1.0 - 0.375));
  CHECK(k(5) == doctest::Approx(1.0));
}

TEST_CASE("inhomogeneous G and F equal the product-limit oracle") {
  Rng rng(83);
  const Window w = Window::rectangle(0, 0, 10, 10);
  const MultitypePattern p = random_multitype(rng, w, 120, 2);
  const Eigen::VectorXd r = r_grid(1.5, 15);
  DistanceOptions opts;
  const std::vector<Eigen::Index> i0 = p.indices_of("t0");
  Points refs(2, static_cast<Eigen::Index>(i0.size()));
  for (std::size_t k = 0; k < i0.size(); ++k) refs.col(static_cast<Eigen::Index>(k)) = p.points.col(i0[k]);
  const Eigen::VectorXd lam_all = intensity_at_points(p, ".", opts.intensity);
  // reference k of t0 sits at position i0[k] of the unmarked pattern
  const Eigen::VectorXd gd = g_oracle(refs, p.points, lam_all, i0, r);
  const SummaryFunction g = gcross(p, "t0", ".", r, opts);
  for (Eigen::Index m = 0; m < r.size(); ++m) CHECK(g.values(m) == doctest::Approx(gd(m)).epsilon(1e-11));
  CHECK(g.name == "Gdot");

  const Points q = query_grid(w, 20, 20);
  CHECK(q.cols() == 400);
  const SummaryFunction f = fest(p, ".", r, q, opts);
  const Eigen::VectorXd fd = g_oracle(q, p.points, lam_all, {}, r);
  for (Eigen::Index m = 0; m < r.size(); ++m) CHECK(f.values(m) == doctest::Approx(fd(m)).epsilon(1e-11));
  CHECK(f.theoretical(3) == doctest::Approx(1 - std::exp(-lam_all.minCoeff() * M_PI * r(3) * r(3))));
}

TEST_CASE("constant intensity reduces G to the nearest-neighbour ECDF") {
  Rng rng(89);
  const Window w = Window::rectangle(0, 0, 5, 5);
  const MultitypePattern p = random_multitype(rng, w, 60, 1);
  DistanceOptions opts;
  opts.intensity.mode = IntensityMode::Constant;
  const Eigen::VectorXd r = r_grid(1.0, 10);
  const SummaryFunction g = gcross(p, "t0", "t0", r, opts);
  for (Eigen::Index m = 0; m < r.size(); ++m) {
    int hits = 0;
    for (Eigen::Index u = 0; u < 60; ++u) {
      double best = 1e9;
      for (Eigen::Index v = 0; v < 60; ++v) {
        if (u != v) best = std::min(best, (p.points.col(u) - p.points.col(v)).norm());
      }
      hits += best <= r(m);
    }
    CHECK(g.values(m) == doctest::Approx(hits / 60.0));
  }
}

TEST_CASE("J and centred Jdot") {
  SummaryFunction g;
  g.name = "Gcross";
  g.r = Eigen::Vector3d(1, 2, 3);
  g.values = Eigen::Vector3d(0.2, 0.5, 0.9);
  g.theoretical = g.values;
  SummaryFunction f = g;
  f.name = "F";
  f.values = Eigen::Vector3d(0.1, 0.5, 1.0);
  const SummaryFunction j = j_from(g, f);
  CHECK(j.name == "Jcross");
  CHECK(j.values(0) == doctest::Approx(0.8 / 0.9));
  CHECK(j.values(1) == doctest::Approx(1.0));
  CHECK(std::isnan(j.values(2)));
  SummaryFunction other = f;
  other.r(2) = 4;
  CHECK(code_of([&] { j_from(g, other); }) == ErrorCode::GridMismatch);

  Rng rng(97);
  const Window w = Window::rectangle(0, 0, 10, 10);
  const MultitypePattern p = random_multitype(rng, w, 150, 2);
  const Eigen::VectorXd r = r_grid(1.0, 12);
  DistanceOptions opts;
  opts.nx = opts.ny = 30;
  const SummaryFunction jc = jdot_centred(p, "t1", r, opts);
  const SummaryFunction ji = jfun(p, "t1", ".", r, opts);
  const SummaryFunction jj = jfun(p, ".", ".", r, opts);
  for (Eigen::Index m = 0; m < r.size(); ++m) {
    if (std::isnan(jc.values(m))) continue;
    CHECK(jc.values(m) == doctest::Approx(ji.values(m) - jj.values(m)).epsilon(1e-12));
  }
  CHECK(jc.theoretical.isZero());
}

TEST_CASE("homogeneous F and G under CSR track the Poisson curve") {
  const Window w = Window::rectangle(0, 0, 20, 20);
  DistanceOptions opts;
  opts.mode = DistanceMode::Homogeneous;
  const Eigen::VectorXd r = r_grid(1.0, 4);
  double fsum = 0.0;
  double gsum = 0.0;
  const int reps = 20;
  for (int k = 0; k < reps; ++k) {
    const MultitypePattern p = simulate_poisson(w, 1.0 / M_PI, 500 + static_cast<std::uint64_t>(k));
    fsum += fest(p, ".", r, opts).values(3);
    gsum += gcross(p, ".", ".", r, opts).values(3);
  }
  CHECK(fsum / reps == doctest::Approx(1 - std::exp(-1.0)).epsilon(0.05));
  CHECK(gsum / reps == doctest::Approx(1 - std::exp(-1.0)).epsilon(0.05));
}

TEST_CASE("errors for empty types and bad intensities") {
  Rng rng(101);
  const Window w = Window::rectangle(0, 0, 5, 5);
  MultitypePattern p = random_multitype(rng, w, 30, 2);
  p.type_levels.push_back("none");
  const Eigen::VectorXd r = r_grid(1.0, 5);
  CHECK(code_of([&] { kcross_inhom(p, "none", "t0", r); }) == ErrorCode::EmptyType);
  IntensityOptions bad;
  bad.at_points["t0"] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.indices_of("t0").size()));
  CHECK(code_of([&] { kcross_inhom(p, "t0", "t1", r, bad); }) == ErrorCode::NonPositiveIntensityAtPoint);
}
