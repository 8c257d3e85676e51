#include <doctest.h>

#include <sstream>

#include "cellpp/counts.hpp"
#include "cellpp/error.hpp"
#include "cellpp/nullmodels.hpp"
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

// Newton's method on the Poisson log-likelihood, written from scratch.
Eigen::VectorXd poisson_ml(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& off) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(X.cols());
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd mu = (X * b + off).array().exp();
    const Eigen::VectorXd score = X.transpose() * (y - mu);
    const Eigen::MatrixXd info = X.transpose() * mu.asDiagonal() * X;
    const Eigen::VectorXd step = info.fullPivLu().solve(score);
    b += step;
    if (step.norm() < 1e-14) break;
  }
  return b;
}

Design synthetic(Rng& rng, int clusters, int per_cluster, double b0, double b1, double frailty_sd) {
  const int n = clusters * per_cluster;
  Design d;
  d.X.resize(n, 2);
  d.y.resize(n);
  d.offset.resize(n);
  d.names = {"(Intercept)", "x"};
  for (int c = 0; c < clusters; ++c) {
    const double frailty = frailty_sd * normal_draw(rng);
    for (int k = 0; k < per_cluster; ++k) {
      const int i = c * per_cluster + k;
      const double x = uniform(rng, -1, 1);
      d.X(i, 0) = 1.0;
      d.X(i, 1) = x;
      d.offset(i) = std::log(uniform(rng, 0.5, 2.0));
      d.y(i) = static_cast<double>(poisson_draw(std::exp(b0 + b1 * x + d.offset(i) + frailty), rng));
      d.cluster.push_back(c);
    }
  }
  return d;
}

MultitypePattern tissue_pattern(const std::string& id, const std::vector<std::pair<int, int>>& type_tissue, double side) {
  Points pts(2, static_cast<Eigen::Index>(type_tissue.size()));
  std::vector<int> types;
  for (std::size_t k = 0; k < type_tissue.size(); ++k) {
    pts.col(static_cast<Eigen::Index>(k)) = Point2(side * (k + 0.5) / type_tissue.size(), side / 2);
    types.push_back(type_tissue[k].first);
  }
  MultitypePattern p = make_pattern(pts, types, immune::kTypes, Window::rectangle(0, 0, side, side));
  p.patient_id = id;
  p.tissue_levels = {"stroma", "tumour"};
  for (const auto& tt : type_tissue) p.tissue.push_back(tt.second);
  return p;
}

}  // namespace

TEST_CASE("counts table rows and offsets") {
  // 3 B-cells in stroma and 5 in tumour on a unit window
  std::vector<std::pair<int, int>> cells(3, {0, 0});
  cells.insert(cells.end(), 5, {0, 1});
  const MultitypePattern p = tissue_pattern("P1", cells, 1.0);
  PatientRecord rec;
  rec.patient_id = "P1";
  const CountsTable t = build_counts_table({p}, {rec});
  CHECK(t.rows.size() == 8);  // 4 types x 2 tissues, zeros kept
  int checked = 0;
  for (const auto& r : t.rows) {
    CHECK(r.offset == 0.0);
    if (r.type != immune::kBCell) {
      CHECK(r.count == 0.0);
    } else {
      CHECK(r.count == (r.tissue == "stroma" ? 3.0 : 5.0));
      ++checked;
    }
  }
  CHECK(checked == 2);
  std::ostringstream out;
  t.write_csv(out);
  CHECK(out.str().rfind("patient_id,sample_id,type,tissue,count,offset", 0) == 0);

  CHECK(code_of([&] { build_counts_table({p}, {}); }) == ErrorCode::MissingRecord);
  MultitypePattern bare = p;
  bare.tissue.clear();
  bare.tissue_levels.clear();
  CHECK(code_of([&] { build_counts_table({bare}, {rec}); }) == ErrorCode::MissingTissueLabel);
}

TEST_CASE("design coding, dropped rows and rank checks") {
  std::vector<MultitypePattern> pats;
  std::vector<PatientRecord> recs;
  const double ages[5] = {50, 61, 47, 70, 58};
  for (int i = 0; i < 5; ++i) {
    pats.push_back(tissue_pattern("P" + std::to_string(i), {{0, 0}, {1, 1}, {2, 0}, {3, 1}, {3, 0}}, 2.0 + i));
    PatientRecord r;
    r.patient_id = pats.back().patient_id;
    r.stage = i < 2 ? Stage::I : Stage::III;
    r.age = ages[i];
    r.brca = i % 2 == 0;
    recs.push_back(r);
  }
  recs[4].age.reset();
  const CountsTable t = build_counts_table(pats, recs);
  ModelSpec spec;
  spec.terms = {"type", "tissue", "stage", "brca", "age"};
  const Design d = build_design(t, spec);
  CHECK(d.dropped_rows == 8);
  CHECK(d.X.rows() == 32);
  CHECK(d.names == std::vector<std::string>{"(Intercept)", immune::kCD4, immune::kCD8, immune::kMacrophage, "tumour",
                                            "stage III", "brca", "age"});
  CHECK(d.offset(0) == doctest::Approx(std::log(4.0)));
  CHECK(d.cluster.front() != d.cluster.back());

  // brca constant across the remaining patients duplicates the intercept
  for (auto& r : recs) r.brca = true;
  CHECK(code_of([&] { build_design(build_counts_table(pats, recs), spec); }) == ErrorCode::RankDeficientDesign);
  CHECK(code_of([&] {
          ModelSpec bad;
          bad.terms = {"shoe_size"};
          build_design(t, bad);
        }) == ErrorCode::InvalidArgument);
}

TEST_CASE("independence with unit dispersion equals Poisson maximum likelihood") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Design d = synthetic(rng, 6, 5, 0.5, 0.8, 0.0);
    d.X.conservativeResize(Eigen::NoChange, 3);
    for (Eigen::Index i = 0; i < d.X.rows(); ++i) d.X(i, 2) = uniform(rng, 0, 1);
    d.names.push_back("z");
    GeeOptions o;
    o.working = WorkingCorrelation::Independence;
    o.fixed_dispersion = 1.0;
    const GeeFit fit = fit_gee_quasipoisson(d, o);
    const Eigen::VectorXd ml = poisson_ml(d.X, d.y, d.offset);
    for (Eigen::Index k = 0; k < 3; ++k) CHECK(fit.beta(k) == doctest::Approx(ml(k)).epsilon(1e-6));
    CHECK(fit.phi == 1.0);
    const Eigen::MatrixXd info = d.X.transpose() * (d.X * fit.beta + d.offset).array().exp().matrix().asDiagonal() * d.X;
    CHECK(fit.naive_cov.isApprox(info.inverse(), 1e-8));
  }
}

TEST_CASE("closed-form fits") {
  // two groups with mean counts 2 and 4 on unit areas
  Design d;
  d.X.resize(8, 2);
  d.y.resize(8);
  d.offset = Eigen::VectorXd::Zero(8);
  d.names = {"(Intercept)", "g"};
  const double ys[8] = {1, 3, 2, 2, 5, 3, 4, 4};
  for (int i = 0; i < 8; ++i) {
    d.X(i, 0) = 1;
    d.X(i, 1) = i >= 4;
    d.y(i) = ys[i];
    d.cluster.push_back(i % 4);
  }
  GeeOptions ind;
  ind.working = WorkingCorrelation::Independence;
  const GeeFit two = fit_gee_quasipoisson(d, ind);
  CHECK(std::abs(two.beta(1) - std::log(2.0)) < 1e-8);
  CHECK(std::abs(two.beta(0) - std::log(2.0)) < 1e-8);

  // constant counts: intercept log c, no Pearson variation
  Design c;
  c.X = Eigen::MatrixXd::Ones(6, 1);
  c.y = Eigen::VectorXd::Constant(6, 7.0);
  c.offset = Eigen::VectorXd::Zero(6);
  c.cluster = {0, 0, 1, 1, 2, 2};
  c.names = {"(Intercept)"};
  const GeeFit flat = fit_gee_quasipoisson(c);
  CHECK(flat.beta(0) == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  CHECK(flat.phi == doctest::Approx(0.0));
  CHECK(flat.robust_se(0) < 1e-6);
  c.cluster.assign(6, 0);
  CHECK(code_of([&] { fit_gee_quasipoisson(c); }) == ErrorCode::SingleCluster);
}

TEST_CASE("property: scaling areas shifts only the intercept") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Design d = synthetic(rng, 12, 8, 1.0, -0.6, 0.4);
    Design s = d;
    const double factor = uniform(rng, 0.01, 100);
    s.offset.array() += std::log(factor);
    const GeeFit a = fit_gee_quasipoisson(d);
    const GeeFit b = fit_gee_quasipoisson(s);
    CHECK(std::abs(b.beta(0) - (a.beta(0) - std::log(factor))) < 1e-8);
    CHECK(std::abs(b.beta(1) - a.beta(1)) < 1e-8);
    // robust covariance is symmetric positive semi-definite
    CHECK(a.robust_cov.isApprox(a.robust_cov.transpose()));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.robust_cov);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12);
    CHECK(a.phi > 0.0);
    CHECK(a.alpha > -1.0);
    CHECK(a.alpha < 1.0);
  }
}

TEST_CASE("Wald table and report formats") {
  GeeFit fit;
  fit.names = {"(Intercept)", "x", "zero"};
  fit.beta = Eigen::Vector3d(1.0, 1.96, 0.0);
  fit.naive_se = Eigen::Vector3d(0.1, 0.5, 0.3);
  fit.robust_se = Eigen::Vector3d(0.2, 1.0, 0.3);
  fit.phi = 2.5;
  const std::vector<WaldRow> rows = wald_table(fit);
  CHECK(rows[0].z == doctest::Approx(5.0));
  CHECK(rows[0].stars == "***");
  CHECK(rows[1].p_value == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(rows[2].p_value == 1.0);
  CHECK(significance_stars(0.004) == "**");
  CHECK(significance_stars(0.04) == "*");
  CHECK(significance_stars(0.06).empty());
  std::ostringstream csv;
  write_wald_csv(csv, rows);
  CHECK(csv.str().rfind("term,estimate,naive_se,robust_se,z,p_value,signif\n", 0) == 0);
  const std::string table = format_wald_table(rows, fit);
  CHECK(table.find("(Intercept)") != std::string::npos);
  CHECK(to_json(fit)["coefficients"].size() == 3);
}
