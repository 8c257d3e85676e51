#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cellpp/pattern.hpp"

namespace cellpp {

struct CountsRow {
  std::string patient_id;
  std::string sample_id;
  std::string type;
  std::string tissue;
  double count = 0.0;
  double offset = 0.0;  // log window area
  PatientRecord record;
};

/// One row per pattern, declared type level and tissue level; zero counts kept.
struct CountsTable {
  std::vector<CountsRow> rows;
  std::vector<std::string> type_levels;
  std::vector<std::string> tissue_levels;

  void write_csv(std::ostream& out) const;
};

CountsTable build_counts_table(const std::vector<MultitypePattern>& patterns, const std::vector<PatientRecord>& records);

/// Covariate terms: type, tissue, primary, prior_chemo, brca, parpi, stage, age.
struct ModelSpec {
  std::vector<std::string> terms = {"type", "tissue", "primary", "prior_chemo", "brca", "parpi", "stage", "age"};
  std::string type_reference = immune::kBCell;
  std::string tissue_reference = "stroma";
  Stage stage_reference = Stage::I;
};

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd offset;
  std::vector<int> cluster;
  std::vector<std::string> names;
  /// Rows dropped because a covariate was unrecorded.
  Eigen::Index dropped_rows = 0;
};

/// Treatment-coded design with intercept. Dummy columns of levels absent from
/// the data are dropped; throws RankDeficientDesign when X lacks full rank.
Design build_design(const CountsTable& table, const ModelSpec& spec);

enum class WorkingCorrelation { Independence, Exchangeable };
std::string to_string(WorkingCorrelation w);

struct GeeOptions {
  WorkingCorrelation working = WorkingCorrelation::Exchangeable;
  /// Fixes phi instead of estimating it from Pearson residuals.
  std::optional<double> fixed_dispersion;
  int max_iterations = 100;
  double tolerance = 1e-8;
};

struct GeeFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd naive_se;
  Eigen::VectorXd robust_se;
  Eigen::MatrixXd naive_cov;
  Eigen::MatrixXd robust_cov;
  double phi = 1.0;
  double alpha = 0.0;  // exchangeable correlation
  WorkingCorrelation working = WorkingCorrelation::Exchangeable;
  int iterations = 0;
  Eigen::Index observations = 0;
  Eigen::Index clusters = 0;
};

/// Log-link estimating equations with Var(y) = phi mu, clustered by patient.
/// Naive covariance phi H^-1, robust covariance H^-1 M H^-1.
GeeFit fit_gee_quasipoisson(const Design& design, const GeeOptions& options = {});
GeeFit fit_gee_quasipoisson(const CountsTable& table, const ModelSpec& spec, const GeeOptions& options = {});

struct WaldRow {
  std::string name;
  double estimate = 0.0;
  double naive_se = 0.0;
  double robust_se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  std::string stars;
};

/// Two-sided normal p-values from the robust SE; *** < 0.001, ** < 0.01, * < 0.05.
std::vector<WaldRow> wald_table(const GeeFit& fit);
std::string significance_stars(double p);
void write_wald_csv(std::ostream& out, const std::vector<WaldRow>& rows);
/// Aligned plain-text table.
std::string format_wald_table(const std::vector<WaldRow>& rows, const GeeFit& fit);
nlohmann::json to_json(const GeeFit& fit);

}  // namespace cellpp
