#include <doctest.h>

#include <sstream>

#include "cellpp/error.hpp"
#include "cellpp/groupstats.hpp"
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

GroupedCurves gaussian_groups(Rng& rng, int per_group, int width, double shift, double scale_b = 1.0) {
  Eigen::MatrixXd c(2 * per_group, width);
  std::vector<std::string> labels;
  for (int i = 0; i < 2 * per_group; ++i) {
    const bool b = i >= per_group;
    for (int k = 0; k < width; ++k) c(i, k) = (b ? scale_b : 1.0) * normal_draw(rng) + (b ? shift : 0.0);
    labels.push_back(b ? "B" : "A");
  }
  return grouped_curves(Eigen::VectorXd::LinSpaced(width, 1, width), c, labels);
}

}  // namespace

TEST_CASE("group labels from clinical records") {
  PatientRecord r;
  r.patient_id = "P7";
  r.stage = Stage::III;
  r.brca = false;
  CHECK(group_label(r, "stage") == to_string(Stage::III));
  CHECK(group_label(r, "brca") == "no");
  try {
    group_label(r, "parpi");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingGroupLabel);
    CHECK(std::string(e.what()).find("P7") != std::string::npos);
  }
  CHECK(code_of([&] { group_label(r, "height"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("patient curves share a grid and identical patterns give identical curves") {
  const Window w = Window::rectangle(0, 0, 40, 40);
  const MultitypePattern a = simulate_poisson(w, 0.2, 3);
  MultitypePattern p1 = a;
  p1.patient_id = "P1";
  MultitypePattern p2 = a;
  p2.patient_id = "P2";
  MultitypePattern p3 = simulate_poisson(Window::rectangle(0, 0, 20, 60), 0.2, 4);
  p3.patient_id = "P3";
  std::vector<PatientRecord> recs(3);
  recs[0].patient_id = "P1";
  recs[0].stage = Stage::I;
  recs[1].patient_id = "P2";
  recs[1].stage = Stage::I;
  recs[2].patient_id = "P3";
  recs[2].stage = Stage::IV;
  StatisticConfig cfg;
  cfg.intensity.mode = IntensityMode::Constant;
  const GroupedCurves g = patient_curves({p1, p2, p3}, recs, "stage", cfg);
  CHECK(g.statistic == "Lcentred");
  CHECK(g.r.size() == 513);
  CHECK(g.r(512) == doctest::Approx(5.0));  // smallest admissible r0 over patients
  CHECK(g.curves.row(0) == g.curves.row(1));
  CHECK(g.levels() == std::vector<std::string>{to_string(Stage::I), to_string(Stage::IV)});
  std::ostringstream out;
  g.write_csv(out);
  CHECK(out.str().rfind("patient,group,r,value\nP1,", 0) == 0);

  recs[2].stage.reset();
  CHECK(code_of([&] { patient_curves({p1, p2, p3}, recs, "stage", cfg); }) == ErrorCode::MissingGroupLabel);
}

TEST_CASE("identical curves give p = 1 for both tests") {
  Eigen::MatrixXd c = Eigen::MatrixXd::Ones(6, 10);
  const GroupedCurves g = grouped_curves(Eigen::VectorXd::LinSpaced(10, 1, 10), c, {"a", "a", "a", "b", "b", "b"});
  CHECK(functional_anova_permutation(g, 99, 1).p_value == 1.0);
  CHECK(functional_levene_test(g, 99, 1).p_value == 1.0);
}

TEST_CASE("group tests reject clear differences and are reproducible") {
  Rng rng(5);
  const GroupedCurves shifted = gaussian_groups(rng, 8, 20, 3.0);
  const EnvelopeResult a = functional_anova_permutation(shifted, 199, 9);
  CHECK(a.p_value <= 0.05);
  CHECK(a.r.size() == 40);
  CHECK(a.statistic == "anova:curve");
  CHECK(functional_anova_permutation(shifted, 199, 9).erl == a.erl);
  const GroupedCurves spread = gaussian_groups(rng, 10, 20, 0.0, 5.0);
  CHECK(functional_levene_test(spread, 199, 9).p_value <= 0.05);
}

TEST_CASE("renaming groups leaves the p-value unchanged") {
  Rng rng(7);
  GroupedCurves g = gaussian_groups(rng, 6, 15, 0.4);
  const double p = functional_anova_permutation(g, 199, 3).p_value;
  const double pl = functional_levene_test(g, 199, 3).p_value;
  for (auto& l : g.labels) l = l == "A" ? "zeta" : "alpha";
  CHECK(functional_anova_permutation(g, 199, 3).p_value == p);
  CHECK(functional_levene_test(g, 199, 3).p_value == pl);
}

TEST_CASE("group tests validate their input") {
  Rng rng(11);
  const GroupedCurves g = gaussian_groups(rng, 4, 5, 0.0);
  CHECK(code_of([&] { functional_anova_permutation(g, 1, 1); }) == ErrorCode::TooFewSimulations);
  const GroupedCurves singles = grouped_curves(Eigen::VectorXd::LinSpaced(3, 1, 3), Eigen::MatrixXd::Random(3, 3), {"a", "b", "c"});
  CHECK(code_of([&] { functional_levene_test(singles, 99, 1); }) == ErrorCode::TooFewCurves);
  CHECK(code_of([&] { grouped_curves(Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Ones(2, 3), {"a", "b"}); }) ==
        ErrorCode::GridMismatch);
}
