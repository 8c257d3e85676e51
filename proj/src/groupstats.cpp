#include "cellpp/groupstats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>

#include "cellpp/csv.hpp"
#include "cellpp/error.hpp"
#include "cellpp/parallel.hpp"
#include "cellpp/random.hpp"

namespace cellpp {

std::vector<std::string> GroupedCurves::levels() const {
  std::vector<std::string> out = labels;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void GroupedCurves::write_csv(std::ostream& out) const {
  out << "patient,group,r,value\n" << std::setprecision(12);
  for (Eigen::Index i = 0; i < curves.rows(); ++i) {
    const std::string id = patient_ids.empty() ? std::to_string(i) : patient_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < r.size(); ++c) {
      out << csv::quote(id) << ',' << csv::quote(labels[static_cast<std::size_t>(i)]) << ',' << r(c) << ','
          << curves(i, c) << '\n';
    }
  }
}

std::string group_label(const PatientRecord& rec, std::string_view field) {
  auto yes_no = [&](const std::optional<bool>& v) -> std::string {
    require(v.has_value(), ErrorCode::MissingGroupLabel,
            "patient " + rec.patient_id + " has no value for '" + std::string(field) + "'");
    return *v ? "yes" : "no";
  };
  if (field == "stage") {
    require(rec.stage.has_value(), ErrorCode::MissingGroupLabel, "patient " + rec.patient_id + " has no stage");
    return to_string(*rec.stage);
  }
  if (field == "primary") return yes_no(rec.primary_tumour);
  if (field == "prior_chemo") return yes_no(rec.prior_chemo);
  if (field == "brca") return yes_no(rec.brca);
  if (field == "parpi") return yes_no(rec.parpi);
  if (field == "death") return yes_no(rec.death);
  fail(ErrorCode::InvalidArgument, "unknown grouping field '" + std::string(field) + "'");
}

GroupedCurves grouped_curves(Eigen::VectorXd r, Eigen::MatrixXd curves, std::vector<std::string> labels,
                             std::vector<std::string> patient_ids) {
  require(curves.cols() == r.size(), ErrorCode::GridMismatch, "curves and grid differ in length");
  require(static_cast<Eigen::Index>(labels.size()) == curves.rows(), ErrorCode::MissingGroupLabel,
          "one group label per curve is required");
  return GroupedCurves{std::move(r), std::move(curves), std::move(patient_ids), std::move(labels), "curve"};
}

GroupedCurves patient_curves(const std::vector<MultitypePattern>& patterns, const std::vector<PatientRecord>& records,
                             const std::string& group_field, StatisticConfig config) {
  require(patterns.size() >= 2, ErrorCode::InvalidArgument, "need at least two patterns");
  if (config.i.empty()) {
    config.statistic = Statistic::Lcentred;
    config.i = std::string(kAnyType);
    config.j = std::string(kAnyType);
  }
  std::map<std::string, const PatientRecord*> by_id;
  for (const auto& rec : records) by_id[rec.patient_id] = &rec;
  std::vector<std::string> labels;
  std::vector<std::string> ids;
  for (const auto& p : patterns) {
    auto it = by_id.find(p.patient_id);
    require(it != by_id.end(), ErrorCode::MissingGroupLabel, "patient " + p.patient_id + " has no clinical record");
    labels.push_back(group_label(*it->second, group_field));
    ids.push_back(p.patient_id);
  }
  Eigen::VectorXd r = config.r;
  if (r.size() == 0) {
    double r0 = std::numeric_limits<double>::infinity();
    for (const auto& p : patterns) r0 = std::min(r0, default_r0(p.window, config.r0_cap));
    require(r0 > 0.0 && std::isfinite(r0), ErrorCode::NoCommonRange, "patients share no admissible distance range");
    r = r_grid(r0, 513);
  }
  Eigen::MatrixXd curves(static_cast<Eigen::Index>(patterns.size()), r.size());
  parallel_for(patterns.size(), [&](std::size_t k) {
    curves.row(static_cast<Eigen::Index>(k)) = evaluate_statistic(patterns[k], config, r).values.transpose();
  });
  std::vector<Eigen::Index> keep;
  for (Eigen::Index c = 0; c < r.size(); ++c) {
    if (curves.col(c).allFinite()) keep.push_back(c);
  }
  require(!keep.empty(), ErrorCode::NoCommonRange, "no distance where every patient's curve is defined");
  Eigen::VectorXd rk(static_cast<Eigen::Index>(keep.size()));
  Eigen::MatrixXd ck(curves.rows(), rk.size());
  for (std::size_t m = 0; m < keep.size(); ++m) {
    rk(static_cast<Eigen::Index>(m)) = r(keep[m]);
    ck.col(static_cast<Eigen::Index>(m)) = curves.col(keep[m]);
  }
  GroupedCurves out{std::move(rk), std::move(ck), std::move(ids), std::move(labels), to_string(config.statistic)};
  return out;
}

namespace {

struct Groups {
  std::vector<int> index;  // group of each row
  std::vector<int> size;
  int count = 0;
};

Groups groups_of(const GroupedCurves& g) {
  require(g.curves.rows() == static_cast<Eigen::Index>(g.labels.size()), ErrorCode::MissingGroupLabel,
          "one group label per curve is required");
  const std::vector<std::string> levels = g.levels();
  require(levels.size() >= 2, ErrorCode::InvalidArgument, "at least two groups are required");
  Groups out;
  out.count = static_cast<int>(levels.size());
  out.size.assign(levels.size(), 0);
  for (const auto& l : g.labels) {
    const int k = static_cast<int>(std::lower_bound(levels.begin(), levels.end(), l) - levels.begin());
    out.index.push_back(k);
    ++out.size[static_cast<std::size_t>(k)];
  }
  for (std::size_t k = 0; k < levels.size(); ++k) {
    require(out.size[k] >= 2, ErrorCode::TooFewCurves, "group '" + levels[k] + "' has fewer than two curves");
  }
  return out;
}

/// Group means of the rows; row k of `curves` belongs to group labels[k].
Eigen::MatrixXd group_means(const Eigen::MatrixXd& curves, const std::vector<int>& labels, const Groups& g) {
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(g.count, curves.cols());
  for (Eigen::Index i = 0; i < curves.rows(); ++i) means.row(labels[static_cast<std::size_t>(i)]) += curves.row(i);
  for (int k = 0; k < g.count; ++k) means.row(k) /= g.size[static_cast<std::size_t>(k)];
  return means;
}

Eigen::RowVectorXd concatenated(const Eigen::MatrixXd& m) {
  Eigen::RowVectorXd out(m.size());
  for (Eigen::Index k = 0; k < m.rows(); ++k) out.segment(k * m.cols(), m.cols()) = m.row(k);
  return out;
}

Eigen::RowVectorXd anova_vector(const Eigen::MatrixXd& curves, const std::vector<int>& labels, const Groups& g) {
  return concatenated(group_means(curves, labels, g));
}

Eigen::RowVectorXd levene_vector(const Eigen::MatrixXd& curves, const std::vector<int>& labels, const Groups& g) {
  const Eigen::MatrixXd means = group_means(curves, labels, g);
  Eigen::MatrixXd resid(curves.rows(), curves.cols());
  for (Eigen::Index i = 0; i < curves.rows(); ++i) {
    resid.row(i) = (curves.row(i) - means.row(labels[static_cast<std::size_t>(i)])).cwiseAbs();
  }
  return concatenated(group_means(resid, labels, g));
}

template <class Stat>
EnvelopeResult permutation_test(const GroupedCurves& grouped, int nperm, std::uint64_t seed, double alpha,
                                const std::string& name, Stat&& stat) {
  require(1.0 / (nperm + 1) <= alpha * (1.0 + 1e-12), ErrorCode::TooFewSimulations,
          std::to_string(nperm) + " permutations cannot resolve alpha = " + std::to_string(alpha));
  const Groups g = groups_of(grouped);
  const Eigen::Index width = g.count * grouped.r.size();
  CurveSet set;
  set.statistic = name;
  set.r.resize(width);
  for (int k = 0; k < g.count; ++k) set.r.segment(k * grouped.r.size(), grouped.r.size()) = grouped.r;
  set.curves.resize(nperm + 1, width);
  set.curves.row(0) = stat(grouped.curves, g.index, g);
  parallel_for(static_cast<std::size_t>(nperm), [&](std::size_t k) {
    Rng rng = Rng::for_replicate(seed, k + 1);
    std::vector<int> labels = g.index;
    shuffle(labels.begin(), labels.end(), rng);
    set.curves.row(static_cast<Eigen::Index>(k) + 1) = stat(grouped.curves, labels, g);
  });
  EnvelopeResult out = global_envelope_test(set, alpha, Side::TwoSided);
  out.seed = seed;
  out.null_spec = {{"kind", "permutation"}, {"groups", grouped.levels()}};
  return out;
}

}  // namespace

EnvelopeResult functional_anova_permutation(const GroupedCurves& grouped, int nperm, std::uint64_t seed, double alpha) {
  return permutation_test(grouped, nperm, seed, alpha, "anova:" + grouped.statistic, anova_vector);
}

EnvelopeResult functional_levene_test(const GroupedCurves& grouped, int nperm, std::uint64_t seed, double alpha) {
  return permutation_test(grouped, nperm, seed, alpha, "levene:" + grouped.statistic, levene_vector);
}

}  // namespace cellpp
