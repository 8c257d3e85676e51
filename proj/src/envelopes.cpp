#include "cellpp/envelopes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cellpp/error.hpp"
#include "cellpp/parallel.hpp"

namespace cellpp {

std::string to_string(Side side) {
  switch (side) {
    case Side::TwoSided: return "two-sided";
    case Side::Upper: return "upper";
    case Side::Lower: return "lower";
  }
  return "?";
}

Side parse_side(std::string_view text) {
  if (text == "two-sided" || text == "two.sided" || text == "both") return Side::TwoSided;
  if (text == "upper" || text == "greater") return Side::Upper;
  if (text == "lower" || text == "less") return Side::Lower;
  fail(ErrorCode::InvalidArgument, "unknown side '" + std::string(text) + "'");
}

namespace {

std::vector<char> valid_columns(const Eigen::MatrixXd& curves) {
  std::vector<char> valid(static_cast<std::size_t>(curves.cols()), 1);
  for (Eigen::Index c = 0; c < curves.cols(); ++c) {
    for (Eigen::Index i = 0; i < curves.rows(); ++i) {
      if (!std::isfinite(curves(i, c))) {
        valid[static_cast<std::size_t>(c)] = 0;
        break;
      }
    }
  }
  return valid;
}

Eigen::MatrixXd kept_columns(const Eigen::MatrixXd& curves, const std::vector<char>& valid) {
  const auto kept = static_cast<Eigen::Index>(std::count(valid.begin(), valid.end(), char(1)));
  Eigen::MatrixXd out(curves.rows(), kept);
  Eigen::Index pos = 0;
  for (Eigen::Index c = 0; c < curves.cols(); ++c) {
    if (valid[static_cast<std::size_t>(c)]) out.col(pos++) = curves.col(c);
  }
  return out;
}

void check_set(const CurveSet& set) {
  require(set.curves.cols() == set.r.size(), ErrorCode::GridMismatch,
          "curve length " + std::to_string(set.curves.cols()) + " differs from grid length " +
              std::to_string(set.r.size()));
  require(set.curves.rows() >= 2, ErrorCode::InvalidArgument, "need the observed curve and at least one simulation");
  require(set.r.size() >= 1, ErrorCode::InvalidArgument, "empty distance grid");
}

Eigen::VectorXd erl_from_ranks(RankMatrix ranks) {
  const Eigen::Index n = ranks.rows();
  const Eigen::Index d = ranks.cols();
  for (Eigen::Index i = 0; i < n; ++i) std::sort(ranks.row(i).data(), ranks.row(i).data() + d);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    return std::lexicographical_compare(ranks.row(a).data(), ranks.row(a).data() + d, ranks.row(b).data(),
                                        ranks.row(b).data() + d);
  };
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), less);
  Eigen::VectorXd e(n);
  std::size_t group = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k > 0 && less(order[k - 1], order[k])) group = k;
    e(order[k]) = static_cast<double>(group) / static_cast<double>(n);
  }
  return e;
}

Eigen::VectorXd erl_of(const Eigen::MatrixXd& curves, const std::vector<char>& valid, Side side) {
  if (std::count(valid.begin(), valid.end(), char(1)) == static_cast<std::ptrdiff_t>(valid.size())) {
    return erl_from_ranks(pointwise_ranks(curves, side));
  }
  return erl_from_ranks(pointwise_ranks(kept_columns(curves, valid), side));
}

}  // namespace

RankMatrix pointwise_ranks(const Eigen::MatrixXd& curves, Side side) {
  const Eigen::Index n = curves.rows();
  RankMatrix ranks(n, curves.cols());
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < curves.cols(); ++c) {
    for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = curves(i, c);
    std::sort(col.begin(), col.end());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = curves(i, c);
      const auto at_most = std::upper_bound(col.begin(), col.end(), v) - col.begin();
      const auto at_least = col.end() - std::lower_bound(col.begin(), col.end(), v);
      int rank = 0;
      switch (side) {
        case Side::Upper: rank = static_cast<int>(at_least); break;
        case Side::Lower: rank = static_cast<int>(at_most); break;
        case Side::TwoSided: rank = static_cast<int>(std::min(at_least, at_most)); break;
      }
      ranks(i, c) = rank;
    }
  }
  return ranks;
}

Eigen::VectorXd erl_measure(const CurveSet& set, Side side) {
  check_set(set);
  const std::vector<char> valid = valid_columns(set.curves);
  require(std::count(valid.begin(), valid.end(), char(1)) > 0, ErrorCode::InvalidArgument,
          "every distance is masked by undefined values");
  return erl_of(set.curves, valid, side);
}

EnvelopeResult global_envelope_test(const CurveSet& set, double alpha, Side side) {
  check_set(set);
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  const Eigen::Index total = set.curves.rows();
  const int s = static_cast<int>(total - 1);
  require(1.0 / (s + 1) <= alpha * (1.0 + 1e-12), ErrorCode::TooFewSimulations,
          std::to_string(s) + " simulations cannot resolve alpha = " + std::to_string(alpha));
  EnvelopeResult out;
  out.statistic = set.statistic;
  out.alpha = alpha;
  out.side = side;
  out.nsim = s;
  out.r = set.r;
  out.observed = set.curves.row(0).transpose();
  out.valid = valid_columns(set.curves);
  require(std::count(out.valid.begin(), out.valid.end(), char(1)) > 0, ErrorCode::InvalidArgument,
          "every distance is masked by undefined values");
  out.erl = erl_of(set.curves, out.valid, side);

  const double e0 = out.erl(0);
  const auto as_extreme = (out.erl.array() <= e0).count();
  out.p_value = static_cast<double>(as_extreme) / static_cast<double>(total);

  std::vector<double> levels(out.erl.data(), out.erl.data() + total);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double k_alpha = levels.front();
  for (double k : levels) {
    const auto below = (out.erl.array() < k).count();
    if (static_cast<double>(below) <= alpha * static_cast<double>(total) * (1.0 + 1e-12)) k_alpha = k;
  }
  out.critical_measure = k_alpha;

  const Eigen::Index d = set.r.size();
  out.lower = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
  out.upper = out.lower;
  out.centre = set.curves.bottomRows(s).colwise().mean().transpose();
  for (Eigen::Index c = 0; c < d; ++c) {
    if (!out.valid[static_cast<std::size_t>(c)]) continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index i = 0; i < total; ++i) {
      if (out.erl(i) < k_alpha) continue;
      lo = std::min(lo, set.curves(i, c));
      hi = std::max(hi, set.curves(i, c));
    }
    out.lower(c) = lo;
    out.upper(c) = hi;
    const double v = set.curves(0, c);
    const bool outside = (side != Side::Lower && v > hi) || (side != Side::Upper && v < lo);
    if (outside) out.exits.push_back(set.r(c));
  }
  out.rejected = out.p_value <= alpha;
  if (out.rejected && out.exits.empty()) {
    // Without value ties a rejected curve leaves the region where its rank is
    // smallest. With ties it can only touch the boundary there; count that.
    const RankMatrix ranks = pointwise_ranks(set.curves, side);
    int best = std::numeric_limits<int>::max();
    for (Eigen::Index c = 0; c < d; ++c) {
      if (out.valid[static_cast<std::size_t>(c)]) best = std::min(best, ranks(0, c));
    }
    for (Eigen::Index c = 0; c < d; ++c) {
      if (out.valid[static_cast<std::size_t>(c)] && ranks(0, c) == best) out.exits.push_back(set.r(c));
    }
  }
  return out;
}

nlohmann::json EnvelopeResult::to_json() const {
  auto vec = [](const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
    return a;
  };
  nlohmann::json j;
  j["statistic"] = statistic;
  j["alpha"] = alpha;
  j["side"] = to_string(side);
  j["nsim"] = nsim;
  j["p_value"] = p_value;
  j["rejected"] = rejected;
  j["critical_measure"] = critical_measure;
  j["erl"] = vec(erl);
  j["r"] = vec(r);
  j["observed"] = vec(observed);
  j["lower"] = vec(lower);
  j["upper"] = vec(upper);
  j["centre"] = vec(centre);
  j["exits"] = exits;
  j["seed"] = seed;
  j["null"] = null_spec;
  return j;
}

std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::Kcross: return "Kcross";
    case Statistic::Lcentred: return "Lcentred";
    case Statistic::Pcf: return "pcf";
    case Statistic::Gcross: return "Gcross";
    case Statistic::Fest: return "Fest";
    case Statistic::J: return "J";
    case Statistic::JdotCentred: return "Jdot-centred";
  }
  return "?";
}

Statistic parse_statistic(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "kcross" || t == "k" || t == "kdot") return Statistic::Kcross;
  if (t == "lcentred" || t == "lcentered" || t == "l" || t == "lcross") return Statistic::Lcentred;
  if (t == "pcf" || t == "pcfcross" || t == "g") return Statistic::Pcf;
  if (t == "gcross" || t == "gdot") return Statistic::Gcross;
  if (t == "fest" || t == "f") return Statistic::Fest;
  if (t == "j" || t == "jcross") return Statistic::J;
  if (t == "jdot-centred" || t == "jdot" || t == "jdotcentred" || t == "jdot-centered") return Statistic::JdotCentred;
  fail(ErrorCode::InvalidArgument, "unknown statistic '" + std::string(text) + "'");
}

Eigen::VectorXd resolve_r(const StatisticConfig& config, const MultitypePattern& pattern) {
  if (config.r.size() > 0) return config.r;
  const double r0 = default_r0(pattern.window, config.r0_cap);
  if (config.statistic != Statistic::Pcf) return r_grid(r0, 513);
  // the pcf kernel needs r >= its half-width: grid from b to r0
  double n = static_cast<double>(pattern.indices_of(config.j).size());
  if (config.i != config.j && config.j != kAnyType) n += static_cast<double>(pattern.indices_of(config.i).size());
  const double b = pcf_bandwidth(std::max(n, 1.0), pattern.window.area());
  require(b < r0, ErrorCode::BandwidthTooSmall, "pcf kernel half-width exceeds r0");
  return Eigen::VectorXd::LinSpaced(513, b, r0);
}

namespace {

DistanceOptions distance_options(const StatisticConfig& c) {
  DistanceOptions d;
  d.mode = c.distance_mode;
  d.intensity = c.intensity;
  d.nx = c.nx;
  d.ny = c.ny;
  return d;
}

struct Cache {
  std::optional<SummaryFunction> f;      // F of the partner type (or unmarked)
  std::optional<SummaryFunction> j_dd;   // J.. for the centred dot statistic
};

SummaryFunction evaluate_cached(const MultitypePattern& pattern, const StatisticConfig& config,
                                const Eigen::VectorXd& r, const Cache& cache) {
  const DistanceOptions dopt = distance_options(config);
  if (config.statistic == Statistic::J && cache.f) {
    return j_from(gcross(pattern, config.i, config.j, r, dopt), *cache.f);
  }
  if (config.statistic == Statistic::JdotCentred && cache.f) {
    return jdot_centred(pattern, config.i, r, dopt, &*cache.f, cache.j_dd ? &*cache.j_dd : nullptr);
  }
  return evaluate_statistic(pattern, config, r);
}

bool cfg_is_cross(const StatisticConfig& c) {
  const bool kind = c.statistic == Statistic::Kcross || c.statistic == Statistic::Lcentred ||
                    c.statistic == Statistic::Pcf || c.statistic == Statistic::Gcross || c.statistic == Statistic::J;
  return kind && c.i != c.j && c.i != kAnyType && c.j != kAnyType;
}

bool uses_dot(const StatisticConfig& c) { return c.statistic == Statistic::JdotCentred || c.j == kAnyType; }

ScalarField type_field(const MultitypePattern& pattern, const std::string& level, const StatisticConfig& config) {
  const MultitypePattern part = restrict(pattern, TypeSelector{level});
  const GridSpec grid = GridSpec::over(pattern.window, config.nx, config.ny);
  const double eps = config.intensity.bandwidth ? *config.intensity.bandwidth
                                                : global_bandwidth(part.points, config.intensity.rule);
  if (part.size() < 2) return fixed_kernel_intensity(part, eps, grid);
  return adaptive_kernel_intensity(part, eps, grid).field;
}

std::uint64_t replicate_seed(std::uint64_t master, int k) {
  Rng rng = Rng::for_replicate(master, static_cast<std::uint64_t>(k));
  return rng();
}

}  // namespace

SummaryFunction evaluate_statistic(const MultitypePattern& pattern, const StatisticConfig& config,
                                   const Eigen::VectorXd& r) {
  const DistanceOptions dopt = distance_options(config);
  switch (config.statistic) {
    case Statistic::Kcross: return kcross_inhom(pattern, config.i, config.j, r, config.intensity, config.edge);
    case Statistic::Lcentred:
      return l_transform(kcross_inhom(pattern, config.i, config.j, r, config.intensity, config.edge), true);
    case Statistic::Pcf:
      return pcf_cross(pattern, config.i, config.j, r, config.intensity,
                       config.edge == EdgeCorrection::Border ? EdgeCorrection::Translation : config.edge);
    case Statistic::Gcross: return gcross(pattern, config.i, config.j, r, dopt);
    case Statistic::Fest: return fest(pattern, config.j, r, dopt);
    case Statistic::J: return jfun(pattern, config.i, config.j, r, dopt);
    case Statistic::JdotCentred: return jdot_centred(pattern, config.i, r, dopt);
  }
  fail(ErrorCode::InvalidArgument, "unknown statistic");
}

CurveSet simulate_curves(const MultitypePattern& pattern, const StatisticConfig& config, const NullSpec& null,
                         int nsim) {
  require(nsim >= 1, ErrorCode::TooFewSimulations, "at least one simulation is required");
  const Eigen::VectorXd r = resolve_r(config, pattern);
  CurveSet set;
  set.r = r;
  set.statistic = to_string(config.statistic);
  set.curves.resize(nsim + 1, r.size());
  const std::string any(kAnyType);

  switch (null.kind) {
    case NullKind::RandomLabel: {
      require(pattern.type_count() >= 2, ErrorCode::IncompatibleNull, "random labelling needs at least two types");
      StatisticConfig cfg = config;
      Cache cache;
      if (uses_dot(cfg) && cfg.intensity.mode != IntensityMode::Constant && !cfg.intensity.at_points.count(any)) {
        // lambda. is label-invariant
        cfg.intensity.at_points[any] = intensity_at_points(pattern, any, cfg.intensity);
      }
      const DistanceOptions dopt = distance_options(cfg);
      if (cfg.statistic == Statistic::JdotCentred) {
        cache.f = fest(pattern, any, r, dopt);
        cache.j_dd = j_from(gcross(pattern, any, any, r, dopt), *cache.f);
      } else if (cfg.statistic == Statistic::J && cfg.j == any) {
        cache.f = fest(pattern, any, r, dopt);
      }
      set.curves.row(0) = evaluate_cached(pattern, cfg, r, cache).values.transpose();
      parallel_for(static_cast<std::size_t>(nsim), [&](std::size_t k) {
        Rng rng = Rng::for_replicate(null.seed, k + 1);
        const MultitypePattern sim = permute_labels(pattern, rng);
        set.curves.row(static_cast<Eigen::Index>(k) + 1) = evaluate_cached(sim, cfg, r, cache).values.transpose();
      });
      break;
    }
    case NullKind::RandomShift: {
      const bool cross_stat = cfg_is_cross(config);
      require(cross_stat, ErrorCode::IncompatibleNull,
              "random shifts test independence of two distinct types; use Kcross, Lcentred, pcf, Gcross or J");
      require(pattern.type_count() >= 2, ErrorCode::IncompatibleNull, "random shifts need at least two types");
      const std::string moving = null.moving.empty() ? config.i : null.moving;
      require(moving == config.i || moving == config.j, ErrorCode::IncompatibleNull,
              "the shifted type must be one of the compared types");
      const std::string fixed = moving == config.i ? config.j : config.i;
      const double radius = null.shift_radius ? *null.shift_radius : r(r.size() - 1);
      const Window wc = erode(pattern.window, radius);
      StatisticConfig cfg = config;
      std::optional<ScalarField> moving_field;
      if (cfg.intensity.mode == IntensityMode::Adaptive) {
        cfg.intensity.mode = IntensityMode::Field;
        moving_field = type_field(pattern, moving, config);
        cfg.intensity.fields.insert_or_assign(fixed, type_field(pattern, fixed, config));
      } else if (cfg.intensity.mode == IntensityMode::Field) {
        auto it = cfg.intensity.fields.find(moving);
        require(it != cfg.intensity.fields.end(), ErrorCode::InvalidArgument, "no intensity field for '" + moving + "'");
        moving_field = it->second;
      }
      const ScalarField* mf = moving_field ? &*moving_field : nullptr;
      const ShiftResult base = random_shift(pattern, moving, radius, 0, mf, Point2::Zero(), &wc);
      StatisticConfig cfg0 = cfg;
      if (base.field) cfg0.intensity.fields.insert_or_assign(moving, *base.field);
      Cache cache;
      if (cfg.statistic == Statistic::J && fixed == config.j) {
        // the partner type does not move: its F is the same in every replicate
        cache.f = fest(base.pattern, config.j, r, distance_options(cfg0));
      }
      set.curves.row(0) = evaluate_cached(base.pattern, cfg0, r, cache).values.transpose();
      parallel_for(static_cast<std::size_t>(nsim), [&](std::size_t k) {
        const ShiftResult sh =
            random_shift(pattern, moving, radius, replicate_seed(null.seed, static_cast<int>(k) + 1), mf, std::nullopt, &wc);
        StatisticConfig ck = cfg;
        if (sh.field) ck.intensity.fields.insert_or_assign(moving, *sh.field);
        set.curves.row(static_cast<Eigen::Index>(k) + 1) = evaluate_cached(sh.pattern, ck, r, cache).values.transpose();
      });
      break;
    }
    case NullKind::Csr: {
      std::vector<std::pair<std::string, double>> lambdas;
      const auto counts = pattern.type_counts();
      for (std::size_t m = 0; m < counts.size(); ++m) {
        lambdas.emplace_back(pattern.type_levels[m], static_cast<double>(counts[m]) / pattern.window.area());
      }
      set.curves.row(0) = evaluate_statistic(pattern, config, r).values.transpose();
      parallel_for(static_cast<std::size_t>(nsim), [&](std::size_t k) {
        const MultitypePattern sim = simulate_csri(pattern.window, lambdas, replicate_seed(null.seed, static_cast<int>(k) + 1));
        set.curves.row(static_cast<Eigen::Index>(k) + 1) = evaluate_statistic(sim, config, r).values.transpose();
      });
      break;
    }
    case NullKind::InhomPoisson: {
      std::vector<ScalarField> fields;
      for (const auto& level : pattern.type_levels) {
        require(pattern.count_of(pattern.type_index(level)) > 0, ErrorCode::IncompatibleNull,
                "type '" + level + "' has no points to estimate its intensity");
        fields.push_back(type_field(pattern, level, config));
      }
      set.curves.row(0) = evaluate_statistic(pattern, config, r).values.transpose();
      parallel_for(static_cast<std::size_t>(nsim), [&](std::size_t k) {
        Rng base = Rng::for_replicate(null.seed, k + 1);
        std::vector<MultitypePattern> parts;
        for (std::size_t m = 0; m < fields.size(); ++m) parts.push_back(simulate_poisson(fields[m], base(), pattern.type_levels[m]));
        MultitypePattern sim = superpose(parts);
        sim.window = pattern.window;
        set.curves.row(static_cast<Eigen::Index>(k) + 1) = evaluate_statistic(sim, config, r).values.transpose();
      });
      break;
    }
    case NullKind::Thomas: {
      require(config.i == config.j || config.j == any, ErrorCode::IncompatibleNull,
              "the cluster null generates a single type");
      set.curves.row(0) = evaluate_statistic(pattern, config, r).values.transpose();
      parallel_for(static_cast<std::size_t>(nsim), [&](std::size_t k) {
        const MultitypePattern sim = simulate_thomas(pattern.window, null.kappa, null.mu, null.sigma,
                                                     replicate_seed(null.seed, static_cast<int>(k) + 1), config.i);
        set.curves.row(static_cast<Eigen::Index>(k) + 1) = evaluate_statistic(sim, config, r).values.transpose();
      });
      break;
    }
  }
  return set;
}

EnvelopeResult envelope_from_generator(const MultitypePattern& pattern, const StatisticConfig& config,
                                       const NullSpec& null, int nsim, double alpha, Side side) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  require(1.0 / (nsim + 1) <= alpha * (1.0 + 1e-12), ErrorCode::TooFewSimulations,
          std::to_string(nsim) + " simulations cannot resolve alpha = " + std::to_string(alpha));
  EnvelopeResult out = global_envelope_test(simulate_curves(pattern, config, null, nsim), alpha, side);
  out.seed = null.seed;
  out.null_spec = to_json(null);
  return out;
}

}  // namespace cellpp
