#include "cellpp/counts.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "cellpp/csv.hpp"
#include "cellpp/error.hpp"

namespace cellpp {

void CountsTable::write_csv(std::ostream& out) const {
  out << std::setprecision(12);
  csv::write_row(out, {"patient_id", "sample_id", "type", "tissue", "count", "offset", "primary", "prior_chemo", "brca",
                       "parpi", "stage", "age"});
  auto flag = [](const std::optional<bool>& v) { return v ? std::string(*v ? "1" : "0") : std::string("NA"); };
  for (const auto& r : rows) {
    std::ostringstream count;
    std::ostringstream offset;
    std::ostringstream age;
    count << std::setprecision(12) << r.count;
    offset << std::setprecision(12) << r.offset;
    if (r.record.age) {
      age << std::setprecision(12) << *r.record.age;
    } else {
      age << "NA";
    }
    csv::write_row(out, {r.patient_id, r.sample_id, r.type, r.tissue, count.str(), offset.str(), flag(r.record.primary_tumour),
                         flag(r.record.prior_chemo), flag(r.record.brca), flag(r.record.parpi),
                         r.record.stage ? to_string(*r.record.stage) : "NA", age.str()});
  }
}

CountsTable build_counts_table(const std::vector<MultitypePattern>& patterns, const std::vector<PatientRecord>& records) {
  std::map<std::string, const PatientRecord*> by_id;
  for (const auto& r : records) by_id[r.patient_id] = &r;
  CountsTable table;
  auto add_level = [](std::vector<std::string>& levels, const std::string& l) {
    if (std::find(levels.begin(), levels.end(), l) == levels.end()) levels.push_back(l);
  };
  for (const auto& p : patterns) {
    require(p.has_tissue() || p.size() == 0, ErrorCode::MissingTissueLabel,
            "pattern of patient " + p.patient_id + " has no tissue labels");
    for (const auto& l : p.type_levels) add_level(table.type_levels, l);
    for (const auto& l : p.tissue_levels) add_level(table.tissue_levels, l);
  }
  require(!table.tissue_levels.empty(), ErrorCode::MissingTissueLabel, "no tissue levels declared");
  for (const auto& p : patterns) {
    auto rec = by_id.find(p.patient_id);
    require(rec != by_id.end(), ErrorCode::MissingRecord, "patient " + p.patient_id + " is not in the clinical table");
    std::map<std::pair<std::string, std::string>, double> counts;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      const auto& type = p.type_levels[static_cast<std::size_t>(p.types[static_cast<std::size_t>(k)])];
      const auto& tissue = p.tissue_levels[static_cast<std::size_t>(p.tissue[static_cast<std::size_t>(k)])];
      counts[{type, tissue}] += 1.0;
    }
    const double offset = std::log(p.window.area());
    for (const auto& type : table.type_levels) {
      for (const auto& tissue : table.tissue_levels) {
        auto it = counts.find({type, tissue});
        table.rows.push_back(
            CountsRow{p.patient_id, p.sample_id, type, tissue, it == counts.end() ? 0.0 : it->second, offset, *rec->second});
      }
    }
  }
  return table;
}

namespace {

std::optional<double> binary_value(const PatientRecord& r, const std::string& term) {
  std::optional<bool> v;
  if (term == "primary") v = r.primary_tumour;
  else if (term == "prior_chemo") v = r.prior_chemo;
  else if (term == "brca") v = r.brca;
  else if (term == "parpi") v = r.parpi;
  else if (term == "death") v = r.death;
  else fail(ErrorCode::InvalidArgument, "unknown model term '" + term + "'");
  if (!v) return std::nullopt;
  return *v ? 1.0 : 0.0;
}

}  // namespace

Design build_design(const CountsTable& table, const ModelSpec& spec) {
  auto ordered = [](std::vector<std::string> levels, const std::string& ref) {
    auto it = std::find(levels.begin(), levels.end(), ref);
    if (it != levels.end()) std::rotate(levels.begin(), it, it + 1);
    return levels;
  };
  const std::vector<std::string> types = ordered(table.type_levels, spec.type_reference);
  const std::vector<std::string> tissues = ordered(table.tissue_levels, spec.tissue_reference);

  std::vector<std::string> names = {"(Intercept)"};
  for (const auto& term : spec.terms) {
    if (term == "type") {
      for (std::size_t k = 1; k < types.size(); ++k) names.push_back(types[k]);
    } else if (term == "tissue") {
      for (std::size_t k = 1; k < tissues.size(); ++k) names.push_back(tissues[k]);
    } else if (term == "stage") {
      for (Stage s : {Stage::I, Stage::II, Stage::III, Stage::IV}) {
        if (s != spec.stage_reference) names.push_back("stage " + to_string(s));
      }
    } else {
      names.push_back(term);
    }
  }
  const auto p = static_cast<Eigen::Index>(names.size());
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> y;
  std::vector<double> off;
  std::vector<std::string> ids;
  Design d;
  for (const auto& r : table.rows) {
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(p);
    x(0) = 1.0;
    Eigen::Index col = 1;
    bool complete = true;
    for (const auto& term : spec.terms) {
      if (term == "type") {
        for (std::size_t k = 1; k < types.size(); ++k) x(col++) = r.type == types[k] ? 1.0 : 0.0;
      } else if (term == "tissue") {
        for (std::size_t k = 1; k < tissues.size(); ++k) x(col++) = r.tissue == tissues[k] ? 1.0 : 0.0;
      } else if (term == "stage") {
        if (!r.record.stage) complete = false;
        for (Stage s : {Stage::I, Stage::II, Stage::III, Stage::IV}) {
          if (s == spec.stage_reference) continue;
          x(col++) = r.record.stage == s ? 1.0 : 0.0;
        }
      } else if (term == "age") {
        if (!r.record.age) complete = false;
        x(col++) = r.record.age.value_or(0.0);
      } else {
        const auto v = binary_value(r.record, term);
        if (!v) complete = false;
        x(col++) = v.value_or(0.0);
      }
    }
    if (!complete) {
      ++d.dropped_rows;
      continue;
    }
    rows.push_back(std::move(x));
    y.push_back(r.count);
    off.push_back(r.offset);
    ids.push_back(r.patient_id);
  }
  require(!rows.empty(), ErrorCode::RankDeficientDesign, "no complete rows for the model");
  // keep the intercept and every column that varies from zero
  std::vector<Eigen::Index> keep = {0};
  for (Eigen::Index c = 1; c < p; ++c) {
    for (const auto& x : rows) {
      if (x(c) != 0.0) {
        keep.push_back(c);
        break;
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.X.resize(n, static_cast<Eigen::Index>(keep.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < keep.size(); ++c) d.X(i, static_cast<Eigen::Index>(c)) = rows[static_cast<std::size_t>(i)](keep[c]);
  }
  for (auto c : keep) d.names.push_back(names[static_cast<std::size_t>(c)]);
  d.y = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  d.offset = Eigen::Map<Eigen::VectorXd>(off.data(), n);
  std::map<std::string, int> cluster_ids;
  for (const auto& id : ids) {
    auto [it, inserted] = cluster_ids.emplace(id, static_cast<int>(cluster_ids.size()));
    d.cluster.push_back(it->second);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
  require(qr.rank() == d.X.cols(), ErrorCode::RankDeficientDesign,
          "design has rank " + std::to_string(qr.rank()) + " but " + std::to_string(d.X.cols()) + " columns");
  return d;
}

std::string to_string(WorkingCorrelation w) {
  return w == WorkingCorrelation::Independence ? "independence" : "exchangeable";
}

namespace {

struct ClusterBlock {
  std::vector<Eigen::Index> rows;
};

struct ScoreParts {
  Eigen::MatrixXd H;  // sum D' V^-1 D with phi factored out
  Eigen::VectorXd U;  // sum D' V^-1 (y - mu)
  Eigen::MatrixXd M;  // sum of outer products of cluster scores
};

ScoreParts score_parts(const Design& d, const std::vector<ClusterBlock>& blocks, const Eigen::VectorXd& mu,
                       double alpha) {
  const Eigen::Index p = d.X.cols();
  ScoreParts s{Eigen::MatrixXd::Zero(p, p), Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Zero(p, p)};
  for (const auto& b : blocks) {
    const auto m = static_cast<Eigen::Index>(b.rows.size());
    Eigen::MatrixXd W(m, p);
    Eigen::VectorXd e(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index row = b.rows[static_cast<std::size_t>(k)];
      const double root = std::sqrt(mu(row));
      W.row(k) = root * d.X.row(row);
      e(k) = (d.y(row) - mu(row)) / root;
    }
    // R^-1 = (I - c 11') / (1 - alpha) for the exchangeable structure
    const double scale = 1.0 / (1.0 - alpha);
    const double c = alpha / (1.0 + (static_cast<double>(m) - 1.0) * alpha);
    const Eigen::VectorXd w1 = W.colwise().sum().transpose();
    const Eigen::MatrixXd h = scale * (W.transpose() * W - c * w1 * w1.transpose());
    const Eigen::VectorXd u = scale * (W.transpose() * e - c * w1 * e.sum());
    s.H += h;
    s.U += u;
    s.M += u * u.transpose();
  }
  return s;
}

}  // namespace

GeeFit fit_gee_quasipoisson(const Design& d, const GeeOptions& options) {
  const Eigen::Index n = d.X.rows();
  const Eigen::Index p = d.X.cols();
  require(n == d.y.size() && n == d.offset.size() && static_cast<std::size_t>(n) == d.cluster.size(),
          ErrorCode::InvalidArgument, "design parts differ in length");
  require(n > p, ErrorCode::RankDeficientDesign, "more coefficients than observations");
  for (Eigen::Index i = 0; i < n; ++i) {
    require(d.y(i) >= 0.0 && std::isfinite(d.offset(i)), ErrorCode::InvalidArgument, "counts must be >= 0, offsets finite");
  }
  std::map<int, std::size_t> where;
  std::vector<ClusterBlock> blocks;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, inserted] = where.emplace(d.cluster[static_cast<std::size_t>(i)], blocks.size());
    if (inserted) blocks.emplace_back();
    blocks[it->second].rows.push_back(i);
  }
  require(blocks.size() >= 2, ErrorCode::SingleCluster, "robust variance needs at least two clusters");
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
    require(qr.rank() == p, ErrorCode::RankDeficientDesign, "design matrix is not of full column rank");
  }
  std::size_t largest = 1;
  double pair_count = 0.0;
  for (const auto& b : blocks) {
    largest = std::max(largest, b.rows.size());
    pair_count += 0.5 * static_cast<double>(b.rows.size()) * static_cast<double>(b.rows.size() - 1);
  }

  GeeFit fit;
  fit.names = d.names;
  fit.working = options.working;
  fit.observations = n;
  fit.clusters = static_cast<Eigen::Index>(blocks.size());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta(0) = std::log(std::max(d.y.sum(), 0.5) / d.offset.array().exp().sum());

  auto moments = [&](const Eigen::VectorXd& mu, double& phi, double& alpha) {
    const Eigen::VectorXd e = (d.y - mu).array() / mu.array().sqrt();
    phi = options.fixed_dispersion ? *options.fixed_dispersion : e.squaredNorm() / static_cast<double>(n - p);
    alpha = 0.0;
    if (options.working == WorkingCorrelation::Exchangeable && phi > 1e-12 && pair_count - p > 0) {
      double cross = 0.0;
      for (const auto& b : blocks) {
        double s = 0.0;
        double s2 = 0.0;
        for (auto row : b.rows) {
          s += e(row);
          s2 += e(row) * e(row);
        }
        cross += 0.5 * (s * s - s2);
      }
      alpha = cross / (phi * (pair_count - p));
      const double floor = largest > 1 ? -1.0 / (static_cast<double>(largest) - 1.0) + 1e-6 : 0.0;
      alpha = std::clamp(alpha, floor, 0.99);
    }
  };

  bool converged = false;
  Eigen::VectorXd mu;
  for (int it = 1; it <= options.max_iterations; ++it) {
    mu = (d.X * beta + d.offset).array().exp();
    double phi = 0.0;
    double alpha = 0.0;
    moments(mu, phi, alpha);
    const ScoreParts s = score_parts(d, blocks, mu, alpha);
    Eigen::VectorXd step = s.H.ldlt().solve(s.U);
    require(step.allFinite(), ErrorCode::NonConvergence, "scoring step is not finite");
    const double largest_step = step.cwiseAbs().maxCoeff();
    if (largest_step > 5.0) step *= 5.0 / largest_step;
    beta += step;
    fit.iterations = it;
    if (largest_step < options.tolerance) {
      converged = true;
      break;
    }
  }
  require(converged, ErrorCode::NonConvergence,
          "no convergence within " + std::to_string(options.max_iterations) + " iterations");
  mu = (d.X * beta + d.offset).array().exp();
  moments(mu, fit.phi, fit.alpha);
  const ScoreParts s = score_parts(d, blocks, mu, fit.alpha);
  const Eigen::MatrixXd Hinv = s.H.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.beta = beta;
  fit.naive_cov = fit.phi * Hinv;
  fit.robust_cov = Hinv * s.M * Hinv;
  fit.robust_cov = 0.5 * (fit.robust_cov + fit.robust_cov.transpose()).eval();
  fit.naive_se = fit.naive_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.robust_se = fit.robust_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

GeeFit fit_gee_quasipoisson(const CountsTable& table, const ModelSpec& spec, const GeeOptions& options) {
  return fit_gee_quasipoisson(build_design(table, spec), options);
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::vector<WaldRow> wald_table(const GeeFit& fit) {
  std::vector<WaldRow> out;
  for (Eigen::Index k = 0; k < fit.beta.size(); ++k) {
    WaldRow r;
    r.name = fit.names[static_cast<std::size_t>(k)];
    r.estimate = fit.beta(k);
    r.naive_se = fit.naive_se(k);
    r.robust_se = fit.robust_se(k);
    if (r.estimate == 0.0) {
      r.z = 0.0;
      r.p_value = 1.0;
    } else if (r.robust_se > 0.0) {
      r.z = r.estimate / r.robust_se;
      r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
    } else {
      r.z = std::copysign(std::numeric_limits<double>::infinity(), r.estimate);
      r.p_value = 0.0;
    }
    r.stars = significance_stars(r.p_value);
    out.push_back(std::move(r));
  }
  return out;
}

void write_wald_csv(std::ostream& out, const std::vector<WaldRow>& rows) {
  csv::write_row(out, {"term", "estimate", "naive_se", "robust_se", "z", "p_value", "signif"});
  for (const auto& r : rows) {
    std::ostringstream s;
    s << std::setprecision(10);
    auto num = [&](double v) {
      s.str("");
      s << v;
      return s.str();
    };
    csv::write_row(out, {r.name, num(r.estimate), num(r.naive_se), num(r.robust_se), num(r.z), num(r.p_value), r.stars});
  }
}

std::string format_wald_table(const std::vector<WaldRow>& rows, const GeeFit& fit) {
  std::size_t width = 9;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "" << std::right << std::setw(11) << "Estimate"
      << std::setw(11) << "Naive SE" << std::setw(11) << "Robust SE" << std::setw(11) << "Pr(>|z|)" << "\n";
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.name << std::right << std::setprecision(3)
        << std::setw(11) << r.estimate << std::setw(11) << r.naive_se << std::setw(11) << r.robust_se
        << std::setprecision(4) << std::setw(11) << r.p_value << ' ' << r.stars << "\n";
  }
  out << "---\nSignif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05\n";
  out << std::setprecision(2) << "Dispersion: " << fit.phi << "  working correlation: " << to_string(fit.working);
  if (fit.working == WorkingCorrelation::Exchangeable) out << std::setprecision(4) << " (alpha " << fit.alpha << ")";
  out << "\nObservations: " << fit.observations << "  clusters: " << fit.clusters << "\n";
  return out.str();
}

nlohmann::json to_json(const GeeFit& fit) {
  nlohmann::json j;
  j["phi"] = fit.phi;
  j["alpha"] = fit.alpha;
  j["working"] = to_string(fit.working);
  j["iterations"] = fit.iterations;
  j["observations"] = fit.observations;
  j["clusters"] = fit.clusters;
  nlohmann::json coef = nlohmann::json::array();
  for (const auto& r : wald_table(fit)) {
    coef.push_back({{"term", r.name},
                    {"estimate", r.estimate},
                    {"naive_se", r.naive_se},
                    {"robust_se", r.robust_se},
                    {"z", std::isfinite(r.z) ? nlohmann::json(r.z) : nlohmann::json(nullptr)},
                    {"p_value", r.p_value},
                    {"signif", r.stars}});
  }
  j["coefficients"] = std::move(coef);
  return j;
}

}  // namespace cellpp
