#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cellpp/envelopes.hpp"
#include "cellpp/pattern.hpp"

namespace cellpp {

/// One descriptor curve per patient (rows) on a shared distance grid.
struct GroupedCurves {
  Eigen::VectorXd r;
  Eigen::MatrixXd curves;
  std::vector<std::string> patient_ids;
  std::vector<std::string> labels;
  std::string statistic;

  /// Distinct labels in sorted order.
  std::vector<std::string> levels() const;
  void write_csv(std::ostream& out) const;
};

/// Label of a clinical field: stage, primary, prior_chemo, brca, parpi, death.
/// Throws MissingGroupLabel when the record has no value.
std::string group_label(const PatientRecord& record, std::string_view field);

/// Default: centred L of the unmarked pattern. r0 is the smallest admissible
/// r0 over the patients; distances where any curve is undefined are dropped.
GroupedCurves patient_curves(const std::vector<MultitypePattern>& patterns, const std::vector<PatientRecord>& records,
                             const std::string& group_field, StatisticConfig config = {});

/// Builds grouped curves from precomputed rows.
GroupedCurves grouped_curves(Eigen::VectorXd r, Eigen::MatrixXd curves, std::vector<std::string> labels,
                             std::vector<std::string> patient_ids = {});

/// Permutation test with the concatenated group means as test vector.
EnvelopeResult functional_anova_permutation(const GroupedCurves& grouped, int nperm, std::uint64_t seed,
                                            double alpha = 0.05);

/// Permutation test on the concatenated group means of |T_i - group mean|.
EnvelopeResult functional_levene_test(const GroupedCurves& grouped, int nperm, std::uint64_t seed,
                                      double alpha = 0.05);

}  // namespace cellpp
