#pragma once

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cellpp/geometry.hpp"

namespace cellpp {

/// Token used wherever a type argument may also mean "any type".
inline constexpr std::string_view kAnyType = ".";

namespace immune {
inline const std::string kBCell = "B-cell";
inline const std::string kCD4 = "CD4 T-cell";
inline const std::string kCD8 = "CD8 T-cell";
inline const std::string kMacrophage = "Macrophage";
/// The four immune categories, in the order used for reporting.
inline const std::vector<std::string> kTypes = {kBCell, kCD4, kCD8, kMacrophage};
}  // namespace immune

/// Multitype marked point pattern. Marks use NaN for "absent" (missing in the
/// source table); no other non-finite values are allowed.
struct MultitypePattern {
  Points points;
  std::vector<int> types;
  std::vector<std::string> type_levels;
  std::vector<int> tissue;  // empty when the pattern carries no tissue labels
  std::vector<std::string> tissue_levels;
  std::map<std::string, Eigen::VectorXd> marks;
  Window window;
  std::string patient_id;
  std::string sample_id;

  Eigen::Index size() const { return points.cols(); }
  int type_count() const { return static_cast<int>(type_levels.size()); }
  bool has_tissue() const { return !tissue.empty(); }

  /// Index of a type level; throws UnknownLevel.
  int type_index(std::string_view level) const;
  int tissue_index(std::string_view level) const;
  /// Points per type level.
  std::vector<Eigen::Index> type_counts() const;
  Eigen::Index count_of(int type) const;
  /// Point indices of a type; kAnyType selects every point.
  std::vector<Eigen::Index> indices_of(std::string_view level) const;

  /// Throws InvalidArgument when an invariant is broken.
  void validate() const;
};

/// Single-type pattern from bare coordinates.
MultitypePattern make_pattern(Points points, Window window, std::string level = "points");

/// Pattern with explicit type labels drawn from `levels`.
MultitypePattern make_pattern(Points points, std::vector<int> types, std::vector<std::string> levels, Window window);

struct TypeSelector {
  std::string level;
};
struct TissueSelector {
  std::string level;
};
struct UnmarkedSelector {};
struct WindowSelector {
  Window window;
};
using Selector = std::variant<TypeSelector, TissueSelector, UnmarkedSelector, WindowSelector>;

MultitypePattern restrict(const MultitypePattern& pattern, const Selector& selector);

/// Points at the given indices; window, levels and identifiers are kept.
MultitypePattern subset(const MultitypePattern& pattern, const std::vector<Eigen::Index>& indices);

/// Superposition of patterns sharing a window; type levels are merged by name.
MultitypePattern superpose(const std::vector<MultitypePattern>& parts);

/// Keeps patterns with at least k points of every listed level.
std::vector<MultitypePattern> filter_min_type_count(const std::vector<MultitypePattern>& patterns, Eigen::Index k = 8,
                                                    const std::vector<std::string>& levels = immune::kTypes);

enum class Stage { I = 1, II = 2, III = 3, IV = 4 };
std::string to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);

struct PatientRecord {
  std::string patient_id;
  std::optional<bool> primary_tumour;
  std::optional<bool> prior_chemo;
  std::optional<bool> brca;
  std::optional<bool> parpi;
  std::optional<Stage> stage;
  std::optional<double> age;
  std::optional<bool> death;
  std::optional<double> survival_time;
};

/// Column mapping for cell and clinical tables.
struct Schema {
  std::string x = "x";
  std::string y = "y";
  std::string patient = "patient_id";
  std::string sample = "sample_id";
  std::string tissue = "tissue";
  /// Phenotype indicator columns for CD19, CD68, CD3, CD8.
  std::string cd19 = "cd19";
  std::string cd68 = "cd68";
  std::string cd3 = "cd3";
  std::string cd8 = "cd8";
  /// When set, the immune type is read from this column instead.
  std::optional<std::string> type_column;
  std::vector<std::string> marks;
  /// One pattern per patient (samples pooled) or one per sample.
  bool pool_samples = true;
  /// Explicit window; otherwise the Ripley-Rasson window of each pattern.
  std::optional<Window> window;
  double coordinate_scale = 1.0;

  std::string clinical_patient = "patient_id";
  std::string primary = "primary";
  std::string prior_chemo = "prior_chemo";
  std::string brca = "brca";
  std::string parpi = "parpi";
  std::string stage = "stage";
  std::string age = "age";
  std::string death = "death";
  std::string survival_time = "survival_time";
};

Schema schema_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Schema& schema);

struct ParseReport {
  std::vector<MultitypePattern> patterns;
  std::vector<PatientRecord> records;
  Eigen::Index cells_read = 0;
  Eigen::Index cells_without_type = 0;
  Eigen::Index phenotype_conflicts = 0;
  std::map<std::string, Eigen::Index> missing_marks;
};

/// Reads a cell table (and optionally a clinical table). Immune type from
/// phenotype indicators: CD19+ B-cell, CD68+ Macrophage, CD3+CD8+ CD8 T-cell,
/// CD3+CD8- CD4 T-cell; conflicts resolved B > Macrophage > CD8 > CD4.
/// Cells matching no rule are skipped.
ParseReport parse_pattern_csv(std::istream& cells, std::istream* clinical, const Schema& schema);

std::vector<PatientRecord> parse_clinical_csv(std::istream& clinical, const Schema& schema);

nlohmann::json to_json(const MultitypePattern& pattern);
MultitypePattern pattern_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PatientRecord& record);
PatientRecord record_from_json(const nlohmann::json& j);

}  // namespace cellpp
