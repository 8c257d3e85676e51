#include "cellpp/secondorder.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

#include "cellpp/error.hpp"
#include "cellpp/parallel.hpp"
#include "cellpp/spatial_index.hpp"

namespace cellpp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPi = 3.14159265358979323846;
// fixed chunk count keeps floating-point summation order independent of threads
constexpr std::size_t kChunks = 64;

Points gather(const Points& points, const std::vector<Eigen::Index>& idx) {
  Points out(2, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = points.col(idx[k]);
  return out;
}

void check_grid(const Eigen::VectorXd& r) {
  require(r.size() >= 1, ErrorCode::InvalidArgument, "empty distance grid");
  require(r(0) > 0.0, ErrorCode::InvalidArgument, "distance grid must be positive");
  for (Eigen::Index m = 1; m < r.size(); ++m) {
    require(r(m) > r(m - 1), ErrorCode::InvalidArgument, "distance grid must be strictly increasing");
  }
}

/// First grid index with r_m >= d (r.size() when none).
Eigen::Index first_at_least(const Eigen::VectorXd& r, double d) {
  return std::lower_bound(r.data(), r.data() + r.size(), d) - r.data();
}

/// First grid index with r_m > d.
Eigen::Index first_above(const Eigen::VectorXd& r, double d) {
  return std::upper_bound(r.data(), r.data() + r.size(), d) - r.data();
}

/// Runs f(item, hist) over items in fixed chunks and sums chunk histograms in order.
template <class F>
Eigen::VectorXd chunked_histogram(Eigen::Index items, Eigen::Index bins, F&& f) {
  const std::size_t chunks = std::min<std::size_t>(kChunks, static_cast<std::size_t>(std::max<Eigen::Index>(items, 1)));
  std::vector<Eigen::VectorXd> partial(chunks, Eigen::VectorXd::Zero(bins));
  parallel_for(chunks, [&](std::size_t c) {
    const auto begin = static_cast<Eigen::Index>(static_cast<std::size_t>(items) * c / chunks);
    const auto end = static_cast<Eigen::Index>(static_cast<std::size_t>(items) * (c + 1) / chunks);
    for (Eigen::Index k = begin; k < end; ++k) f(k, partial[c]);
  });
  Eigen::VectorXd total = Eigen::VectorXd::Zero(bins);
  for (const auto& p : partial) total += p;
  return total;
}

Eigen::VectorXd cumulative(const Eigen::VectorXd& hist, Eigen::Index count) {
  Eigen::VectorXd out(count);
  double s = 0.0;
  for (Eigen::Index m = 0; m < count; ++m) {
    s += hist(m);
    out(m) = s;
  }
  return out;
}

/// Reference points X(i) against partner points X(j) or X(.).
struct PairSetup {
  std::vector<Eigen::Index> ref_global;
  std::vector<Eigen::Index> other_global;
  Points ref;
  Points other;
};

PairSetup pair_setup(const MultitypePattern& pattern, const std::string& i, const std::string& j) {
  PairSetup s;
  s.ref_global = pattern.indices_of(i);
  s.other_global = pattern.indices_of(j);
  require(!s.ref_global.empty(), ErrorCode::EmptyType, "no points of type '" + i + "'");
  require(!s.other_global.empty(), ErrorCode::EmptyType, "no points of type '" + j + "'");
  s.ref = gather(pattern.points, s.ref_global);
  s.other = gather(pattern.points, s.other_global);
  return s;
}

double edge_weight(EdgeCorrection edge, const Window& window, const Point2& shift) {
  if (edge != EdgeCorrection::Translation) return 1.0;
  const double overlap = translated_overlap(window, shift);
  return overlap > 0.0 ? window.area() / overlap : 0.0;
}

std::string intensity_tag(const IntensityOptions& o, const std::string& level) {
  if (o.at_points.count(level)) return "precomputed";
  return to_string(o.mode);
}

std::string name_for(const std::string& base, const std::string& i, const std::string& j) {
  if (j == kAnyType && i != kAnyType) return base + "dot";
  if (i == j) return base;
  return base + "cross";
}

}  // namespace

std::string to_string(EdgeCorrection e) {
  switch (e) {
    case EdgeCorrection::Translation: return "translation";
    case EdgeCorrection::Border: return "border";
    case EdgeCorrection::None: return "none";
  }
  return "?";
}

std::string to_string(IntensityMode m) {
  switch (m) {
    case IntensityMode::Constant: return "constant";
    case IntensityMode::Adaptive: return "adaptive";
    case IntensityMode::Field: return "field";
  }
  return "?";
}

void SummaryFunction::write_csv(std::ostream& out) const {
  out << "r,value,theoretical\n" << std::setprecision(12);
  for (Eigen::Index m = 0; m < r.size(); ++m) {
    out << r(m) << ',';
    if (std::isnan(values(m))) {
      out << "NA";
    } else {
      out << values(m);
    }
    out << ',' << theoretical(m) << '\n';
  }
}

nlohmann::json SummaryFunction::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["type_i"] = type_i;
  j["type_j"] = type_j;
  j["edge_correction"] = edge_correction;
  j["intensity_source"] = intensity_source;
  j["r"] = std::vector<double>(r.data(), r.data() + r.size());
  nlohmann::json v = nlohmann::json::array();
  for (double x : values) v.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
  j["values"] = std::move(v);
  j["theoretical"] = std::vector<double>(theoretical.data(), theoretical.data() + theoretical.size());
  return j;
}

double default_r0(const Window& window, double cap) {
  const Point2 side = window.bbox().sizes();
  return std::min(cap, 0.25 * std::min(side.x(), side.y()));
}

Eigen::VectorXd r_grid(double r0, int count) {
  require(r0 > 0.0 && count >= 1, ErrorCode::InvalidArgument, "r grid needs r0 > 0 and at least one value");
  Eigen::VectorXd r(count);
  for (int m = 0; m < count; ++m) r(m) = r0 * (m + 1) / count;
  return r;
}

Eigen::VectorXd default_r_grid(const Window& window, double cap, int count) {
  return r_grid(default_r0(window, cap), count);
}

Eigen::VectorXd intensity_at_points(const MultitypePattern& pattern, const std::string& level,
                                    const IntensityOptions& options) {
  const std::vector<Eigen::Index> idx = pattern.indices_of(level);
  require(!idx.empty(), ErrorCode::EmptyType, "no points of type '" + level + "'");
  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd out(n);
  if (auto it = options.at_points.find(level); it != options.at_points.end()) {
    require(it->second.size() == n, ErrorCode::InvalidArgument, "precomputed intensity for '" + level + "' has wrong size");
    out = it->second;
  } else {
    const Points pts = gather(pattern.points, idx);
    switch (options.mode) {
      case IntensityMode::Constant: {
        auto c = options.constants.find(level);
        out.setConstant(c != options.constants.end() ? c->second : static_cast<double>(n) / pattern.window.area());
        break;
      }
      case IntensityMode::Field: {
        auto f = options.fields.find(level);
        if (f != options.fields.end()) {
          for (Eigen::Index k = 0; k < n; ++k) out(k) = f->second.at(pts.col(k));
        } else {
          require(level == kAnyType && !options.fields.empty(), ErrorCode::InvalidArgument,
                  "no intensity field supplied for '" + level + "'");
          out.setZero();
          for (const auto& lvl : pattern.type_levels) {
            auto g = options.fields.find(lvl);
            require(g != options.fields.end(), ErrorCode::InvalidArgument, "no intensity field supplied for '" + lvl + "'");
            for (Eigen::Index k = 0; k < n; ++k) out(k) += g->second.at(pts.col(k));
          }
        }
        break;
      }
      case IntensityMode::Adaptive: {
        require(n >= 2, ErrorCode::NonPositiveIntensityAtPoint,
                "leave-one-out intensity of '" + level + "' needs at least two points");
        const double eps = options.bandwidth ? *options.bandwidth : global_bandwidth(pts, options.rule);
        const Eigen::VectorXd pilot = fixed_intensity_at(pts, pattern.window, eps, pts);
        out = adaptive_intensity_at_points(pts, pattern.window, adaptive_spec(eps, pilot), true);
        break;
      }
    }
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    require(out(k) > 0.0 && std::isfinite(out(k)), ErrorCode::NonPositiveIntensityAtPoint,
            "intensity of '" + level + "' is not positive at point " + std::to_string(idx[static_cast<std::size_t>(k)]));
  }
  return out;
}

SummaryFunction kcross_inhom(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                             const Eigen::VectorXd& r, const IntensityOptions& options, EdgeCorrection edge) {
  check_grid(r);
  const PairSetup s = pair_setup(pattern, i, j);
  const Eigen::VectorXd li = intensity_at_points(pattern, i, options);
  const Eigen::VectorXd lj = intensity_at_points(pattern, j, options);
  const KdTree tree(s.other);
  const Window& W = pattern.window;
  const double rmax = r(r.size() - 1);
  const Eigen::Index d = r.size();
  const auto nref = static_cast<Eigen::Index>(s.ref_global.size());

  Eigen::VectorXd border(nref);
  if (edge == EdgeCorrection::Border) {
    for (Eigen::Index l = 0; l < nref; ++l) border(l) = W.boundary_distance(s.ref.col(l));
  }
  const Eigen::VectorXd num = chunked_histogram(nref, d + 1, [&](Eigen::Index l, Eigen::VectorXd& h) {
    const Point2 u = s.ref.col(l);
    const Eigen::Index stop = edge == EdgeCorrection::Border ? first_above(r, border(l)) : d;
    tree.for_each_within(u, rmax, [&](Eigen::Index k, double d2) {
      if (s.other_global[static_cast<std::size_t>(k)] == s.ref_global[static_cast<std::size_t>(l)]) return;
      const Eigen::Index bin = first_at_least(r, std::sqrt(d2));
      if (bin >= stop) return;
      const double w = edge_weight(edge, W, s.other.col(k) - u) / (li(l) * lj(k));
      h(bin) += w;
      h(stop) -= w;
    });
  });
  SummaryFunction out;
  out.name = name_for("K", i, j);
  out.type_i = i;
  out.type_j = j;
  out.r = r;
  out.edge_correction = to_string(edge);
  out.intensity_source = intensity_tag(options, j);
  out.theoretical = kPi * r.array().square();
  const Eigen::VectorXd top = cumulative(num, d);
  if (edge == EdgeCorrection::Border) {
    Eigen::VectorXd den_h = Eigen::VectorXd::Zero(d + 1);
    for (Eigen::Index l = 0; l < nref; ++l) {
      den_h(0) += 1.0 / li(l);
      den_h(first_above(r, border(l))) -= 1.0 / li(l);
    }
    const Eigen::VectorXd den = cumulative(den_h, d);
    out.values.resize(d);
    for (Eigen::Index m = 0; m < d; ++m) out.values(m) = den(m) > 0.0 ? top(m) / den(m) : kNaN;
  } else {
    out.values = top / W.area();
  }
  return out;
}

SummaryFunction kcross_inhom_naive(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                                   const Eigen::VectorXd& r, const IntensityOptions& options, EdgeCorrection edge) {
  check_grid(r);
  const PairSetup s = pair_setup(pattern, i, j);
  const Eigen::VectorXd li = intensity_at_points(pattern, i, options);
  const Eigen::VectorXd lj = intensity_at_points(pattern, j, options);
  const Window& W = pattern.window;
  SummaryFunction out;
  out.name = name_for("K", i, j);
  out.type_i = i;
  out.type_j = j;
  out.r = r;
  out.edge_correction = to_string(edge);
  out.intensity_source = intensity_tag(options, j);
  out.theoretical = kPi * r.array().square();
  out.values.resize(r.size());
  for (Eigen::Index m = 0; m < r.size(); ++m) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t l = 0; l < s.ref_global.size(); ++l) {
      const Point2 u = s.ref.col(static_cast<Eigen::Index>(l));
      const bool counted = edge != EdgeCorrection::Border || W.boundary_distance(u) >= r(m);
      if (!counted) continue;
      den += 1.0 / li(static_cast<Eigen::Index>(l));
      for (std::size_t k = 0; k < s.other_global.size(); ++k) {
        if (s.other_global[k] == s.ref_global[l]) continue;
        const Point2 v = s.other.col(static_cast<Eigen::Index>(k));
        if ((v - u).norm() > r(m)) continue;
        num += edge_weight(edge, W, v - u) / (li(static_cast<Eigen::Index>(l)) * lj(static_cast<Eigen::Index>(k)));
      }
    }
    if (edge == EdgeCorrection::Border) {
      out.values(m) = den > 0.0 ? num / den : kNaN;
    } else {
      out.values(m) = num / W.area();
    }
  }
  return out;
}

SummaryFunction l_transform(const SummaryFunction& k, bool centred) {
  SummaryFunction out = k;
  out.name = (centred ? "Lcentred" : "L") + k.name.substr(k.name.empty() ? 0 : 1);
  for (Eigen::Index m = 0; m < k.values.size(); ++m) {
    const double v = k.values(m);
    if (std::isnan(v)) continue;
    require(v >= 0.0, ErrorCode::NegativeK, "K is negative at r = " + std::to_string(k.r(m)));
    out.values(m) = std::sqrt(v / kPi) - (centred ? k.r(m) : 0.0);
  }
  out.theoretical = centred ? Eigen::VectorXd::Zero(k.r.size()) : Eigen::VectorXd(k.r);
  return out;
}

double pcf_bandwidth(double n, double area) {
  require(n > 0 && area > 0, ErrorCode::InvalidArgument, "pcf bandwidth needs points and area");
  return 0.15 / std::sqrt(n / area);
}

SummaryFunction pcf_cross(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                          const Eigen::VectorXd& r, const IntensityOptions& options, EdgeCorrection edge,
                          std::optional<double> bandwidth) {
  check_grid(r);
  require(edge != EdgeCorrection::Border, ErrorCode::InvalidArgument, "pcf supports translation or no edge correction");
  const PairSetup s = pair_setup(pattern, i, j);
  const Window& W = pattern.window;
  double n_points = static_cast<double>(s.other_global.size());
  if (i != j && j != kAnyType) n_points += static_cast<double>(s.ref_global.size());
  const double b = bandwidth ? *bandwidth : pcf_bandwidth(n_points, W.area());
  require(b > 0.0, ErrorCode::InvalidArgument, "pcf bandwidth must be positive");
  require(r(0) >= b, ErrorCode::BandwidthTooSmall,
          "smallest distance " + std::to_string(r(0)) + " is below the kernel half-width " + std::to_string(b));
  const Eigen::VectorXd li = intensity_at_points(pattern, i, options);
  const Eigen::VectorXd lj = intensity_at_points(pattern, j, options);
  const KdTree tree(s.other);
  const double reach = r(r.size() - 1) + b;
  const Eigen::Index d = r.size();
  const auto nref = static_cast<Eigen::Index>(s.ref_global.size());
  const Eigen::VectorXd sums = chunked_histogram(nref, d, [&](Eigen::Index l, Eigen::VectorXd& h) {
    const Point2 u = s.ref.col(l);
    tree.for_each_within(u, reach, [&](Eigen::Index k, double d2) {
      if (s.other_global[static_cast<std::size_t>(k)] == s.ref_global[static_cast<std::size_t>(l)]) return;
      const double dist = std::sqrt(d2);
      const double w = edge_weight(edge, W, s.other.col(k) - u) / (li(l) * lj(k));
      for (Eigen::Index m = first_at_least(r, dist - b); m < d && r(m) <= dist + b; ++m) {
        const double t = (r(m) - dist) / b;
        h(m) += w * 0.75 / b * (1.0 - t * t);
      }
    });
  });
  SummaryFunction out;
  out.name = name_for("pcf", i, j);
  out.type_i = i;
  out.type_j = j;
  out.r = r;
  out.edge_correction = to_string(edge);
  out.intensity_source = intensity_tag(options, j);
  out.theoretical = Eigen::VectorXd::Ones(d);
  out.values = sums.array() / (2.0 * kPi * r.array() * W.area());
  return out;
}

Eigen::VectorXd kaplan_meier_cdf(const Eigen::VectorXd& d, const Eigen::VectorXd& c, const Eigen::VectorXd& r) {
  const Eigen::Index n = d.size();
  std::vector<std::pair<double, bool>> obs(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) obs[static_cast<std::size_t>(k)] = {std::min(d(k), c(k)), d(k) <= c(k)};
  std::sort(obs.begin(), obs.end());
  std::vector<double> times;
  std::vector<double> survival;
  double S = 1.0;
  std::size_t pos = 0;
  while (pos < obs.size()) {
    const double t = obs[pos].first;
    const auto at_risk = static_cast<double>(obs.size() - pos);
    double events = 0.0;
    while (pos < obs.size() && obs[pos].first == t) {
      events += obs[pos].second ? 1.0 : 0.0;
      ++pos;
    }
    if (events > 0.0) {
      S *= 1.0 - events / at_risk;
      times.push_back(t);
      survival.push_back(S);
    }
  }
  Eigen::VectorXd out(r.size());
  for (Eigen::Index m = 0; m < r.size(); ++m) {
    const auto it = std::upper_bound(times.begin(), times.end(), r(m));
    out(m) = it == times.begin() ? 0.0 : 1.0 - survival[static_cast<std::size_t>(it - times.begin() - 1)];
  }
  return out;
}

namespace {

/// Averages the product-limit survivals over reference locations. `exclude`
/// gives, per reference, the partner index to skip (or -1).
template <class ExcludeFn>
Eigen::VectorXd product_estimator(const Points& refs, const KdTree& partners, const Eigen::VectorXd& factor,
                                  const Eigen::VectorXd& r, const std::vector<char>& use, ExcludeFn&& exclude) {
  const Eigen::Index d = r.size();
  const double rmax = r(d - 1);
  const Eigen::VectorXd h = chunked_histogram(refs.cols(), d + 1, [&](Eigen::Index q, Eigen::VectorXd& hist) {
    if (!use[static_cast<std::size_t>(q)]) return;
    std::vector<std::pair<double, double>> nb;
    const Eigen::Index skip = exclude(q);
    partners.for_each_within(refs.col(q), rmax, [&](Eigen::Index k, double d2) {
      if (k != skip) nb.emplace_back(std::sqrt(d2), factor(k));
    });
    std::sort(nb.begin(), nb.end());
    double prod = 1.0;
    for (const auto& [dist, f] : nb) {
      const double next = prod * f;
      hist(first_at_least(r, dist)) += next - prod;
      prod = next;
    }
  });
  const double used = static_cast<double>(std::count(use.begin(), use.end(), char(1)));
  require(used > 0, ErrorCode::EmptyQueryGrid, "no reference location satisfies the border condition");
  return -cumulative(h, d) / used;
}

Eigen::VectorXd thinning_factors(const Eigen::VectorXd& lambda, double& lambda_bar) {
  lambda_bar = lambda.minCoeff();
  return (1.0 - lambda_bar / lambda.array()).matrix();
}

}  // namespace

SummaryFunction gcross(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                       const Eigen::VectorXd& r, const DistanceOptions& options) {
  check_grid(r);
  const PairSetup s = pair_setup(pattern, i, j);
  const Window& W = pattern.window;
  const KdTree tree(s.other);
  const auto nref = static_cast<Eigen::Index>(s.ref_global.size());
  // partner index of each reference point in the partner set, when shared
  std::vector<Eigen::Index> self(static_cast<std::size_t>(nref), -1);
  {
    std::map<Eigen::Index, Eigen::Index> where;
    for (std::size_t k = 0; k < s.other_global.size(); ++k) where[s.other_global[k]] = static_cast<Eigen::Index>(k);
    for (std::size_t l = 0; l < s.ref_global.size(); ++l) {
      if (auto it = where.find(s.ref_global[l]); it != where.end()) self[l] = it->second;
    }
  }
  SummaryFunction out;
  out.name = name_for("G", i, j);
  out.type_i = i;
  out.type_j = j;
  out.r = r;
  if (options.mode == DistanceMode::Homogeneous) {
    Eigen::VectorXd dist(nref);
    Eigen::VectorXd cens(nref);
    for (Eigen::Index l = 0; l < nref; ++l) {
      dist(l) = tree.nearest(s.ref.col(l), self[static_cast<std::size_t>(l)]).second;
      cens(l) = W.boundary_distance(s.ref.col(l));
    }
    out.values = kaplan_meier_cdf(dist, cens, r);
    const double lambda = static_cast<double>(s.other_global.size()) / W.area();
    out.theoretical = 1.0 - (-lambda * kPi * r.array().square()).exp();
    out.edge_correction = "km";
    out.intensity_source = "homogeneous";
    return out;
  }
  double lambda_bar = 0.0;
  const Eigen::VectorXd factor = thinning_factors(intensity_at_points(pattern, j, options.intensity), lambda_bar);
  std::vector<char> use(static_cast<std::size_t>(nref), 1);
  if (options.border) {
    for (Eigen::Index l = 0; l < nref; ++l) {
      use[static_cast<std::size_t>(l)] = W.boundary_distance(s.ref.col(l)) >= r(r.size() - 1) ? 1 : 0;
    }
  }
  out.values = product_estimator(s.ref, tree, factor, r, use, [&](Eigen::Index q) { return self[static_cast<std::size_t>(q)]; });
  out.theoretical = 1.0 - (-lambda_bar * kPi * r.array().square()).exp();
  out.edge_correction = options.border ? "border" : "none";
  out.intensity_source = intensity_tag(options.intensity, j);
  return out;
}

Points query_grid(const Window& window, int nx, int ny) {
  const GridSpec grid = GridSpec::over(window, nx, ny);
  std::vector<Point2> inside;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Point2 c = grid.centre(i, j);
      if (window.contains(c)) inside.push_back(c);
    }
  }
  Points out(2, static_cast<Eigen::Index>(inside.size()));
  for (std::size_t k = 0; k < inside.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = inside[k];
  return out;
}

SummaryFunction fest(const MultitypePattern& pattern, const std::string& j, const Eigen::VectorXd& r,
                     const DistanceOptions& options) {
  return fest(pattern, j, r, query_grid(pattern.window, options.nx, options.ny), options);
}

SummaryFunction fest(const MultitypePattern& pattern, const std::string& j, const Eigen::VectorXd& r,
                     const Points& queries, const DistanceOptions& options) {
  check_grid(r);
  require(queries.cols() > 0, ErrorCode::EmptyQueryGrid, "no query location inside the window");
  const std::vector<Eigen::Index> idx = pattern.indices_of(j);
  require(!idx.empty(), ErrorCode::EmptyType, "no points of type '" + j + "'");
  const Points pts = gather(pattern.points, idx);
  const KdTree tree(pts);
  const Window& W = pattern.window;
  SummaryFunction out;
  out.name = "F";
  out.type_i = j;
  out.type_j = j;
  out.r = r;
  if (options.mode == DistanceMode::Homogeneous) {
    Eigen::VectorXd dist(queries.cols());
    Eigen::VectorXd cens(queries.cols());
    parallel_for(static_cast<std::size_t>(queries.cols()), [&](std::size_t qq) {
      const auto q = static_cast<Eigen::Index>(qq);
      dist(q) = tree.nearest(queries.col(q)).second;
      cens(q) = W.boundary_distance(queries.col(q));
    });
    out.values = kaplan_meier_cdf(dist, cens, r);
    const double lambda = static_cast<double>(idx.size()) / W.area();
    out.theoretical = 1.0 - (-lambda * kPi * r.array().square()).exp();
    out.edge_correction = "km";
    out.intensity_source = "homogeneous";
    return out;
  }
  double lambda_bar = 0.0;
  const Eigen::VectorXd factor = thinning_factors(intensity_at_points(pattern, j, options.intensity), lambda_bar);
  std::vector<char> use(static_cast<std::size_t>(queries.cols()), 1);
  if (options.border) {
    for (Eigen::Index q = 0; q < queries.cols(); ++q) {
      use[static_cast<std::size_t>(q)] = W.boundary_distance(queries.col(q)) >= r(r.size() - 1) ? 1 : 0;
    }
  }
  out.values = product_estimator(queries, tree, factor, r, use, [](Eigen::Index) { return Eigen::Index{-1}; });
  out.theoretical = 1.0 - (-lambda_bar * kPi * r.array().square()).exp();
  out.edge_correction = options.border ? "border" : "none";
  out.intensity_source = intensity_tag(options.intensity, j);
  return out;
}

SummaryFunction j_from(const SummaryFunction& g, const SummaryFunction& f) {
  require(g.r.size() == f.r.size() && g.r == f.r, ErrorCode::GridMismatch, "G and F use different distance grids");
  SummaryFunction out = g;
  out.name = "J" + g.name.substr(1);
  out.theoretical = Eigen::VectorXd::Ones(g.r.size());
  for (Eigen::Index m = 0; m < g.r.size(); ++m) {
    out.values(m) = f.values(m) >= 1.0 - 1e-9 ? kNaN : (1.0 - g.values(m)) / (1.0 - f.values(m));
  }
  return out;
}

SummaryFunction jfun(const MultitypePattern& pattern, const std::string& i, const std::string& j,
                     const Eigen::VectorXd& r, const DistanceOptions& options) {
  return j_from(gcross(pattern, i, j, r, options), fest(pattern, j, r, options));
}

SummaryFunction jdot_centred(const MultitypePattern& pattern, const std::string& i, const Eigen::VectorXd& r,
                             const DistanceOptions& options, const SummaryFunction* f_dot,
                             const SummaryFunction* j_dotdot) {
  const std::string any(kAnyType);
  SummaryFunction f_local;
  if (!f_dot) {
    f_local = fest(pattern, any, r, options);
    f_dot = &f_local;
  }
  const SummaryFunction j_i = j_from(gcross(pattern, i, any, r, options), *f_dot);
  SummaryFunction jj_local;
  if (!j_dotdot) {
    jj_local = j_from(gcross(pattern, any, any, r, options), *f_dot);
    j_dotdot = &jj_local;
  }
  require(j_dotdot->r == r, ErrorCode::GridMismatch, "J.. uses a different distance grid");
  SummaryFunction out = j_i;
  out.name = "Jdot-centred";
  out.values = j_i.values - j_dotdot->values;
  out.theoretical = Eigen::VectorXd::Zero(r.size());
  return out;
}

}  // namespace cellpp
