#include "cellpp/nullmodels.hpp"

#include <cmath>
#include <numeric>

#include "cellpp/error.hpp"

namespace cellpp {

namespace {
constexpr double kPi = 3.14159265358979323846;

std::uint64_t poisson_inversion(double mean, Rng& rng) {
  // sequential search from 0; adequate for mean < 30
  double p = std::exp(-mean);
  double cdf = p;
  const double u = rng.uniform();
  std::uint64_t k = 0;
  while (u > cdf && k < 1000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

std::uint64_t poisson_ptrs(double mean, Rng& rng) {
  // transformed rejection with squeeze (Hormann 1993)
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2);
  while (true) {
    const double U = rng.uniform() - 0.5;
    const double V = rng.uniform();
    const double us = 0.5 - std::abs(U);
    const double k = std::floor((2 * a / us + b) * U + mean + 0.43);
    if (us >= 0.07 && V <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0 || (us < 0.013 && V > us)) continue;
    if (std::log(V) + std::log(invalpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - std::lgamma(k + 1)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

MultitypePattern from_points(Points pts, const Window& window, const std::string& level) {
  return make_pattern(std::move(pts), window, level);
}

}  // namespace

std::uint64_t poisson_draw(double mean, Rng& rng) {
  require(mean >= 0.0 && std::isfinite(mean), ErrorCode::NegativeIntensity, "Poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  return mean < 30.0 ? poisson_inversion(mean, rng) : poisson_ptrs(mean, rng);
}

double normal_draw(Rng& rng) {
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

Points uniform_in_window(const Window& window, Eigen::Index n, Rng& rng) {
  Points out(2, n);
  const Box2& box = window.bbox();
  const Point2 lo = box.min();
  const Point2 span = box.sizes();
  for (Eigen::Index k = 0; k < n; ++k) {
    while (true) {
      const Point2 u(lo.x() + span.x() * rng.uniform(), lo.y() + span.y() * rng.uniform());
      if (window.is_rectangle() || window.contains(u)) {
        out.col(k) = u;
        break;
      }
    }
  }
  return out;
}

MultitypePattern simulate_poisson(const Window& window, double intensity, std::uint64_t seed, const std::string& level) {
  require(intensity >= 0.0, ErrorCode::NegativeIntensity, "intensity must be non-negative");
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(poisson_draw(intensity * window.area(), rng));
  return from_points(uniform_in_window(window, n, rng), window, level);
}

MultitypePattern simulate_poisson(const ScalarField& intensity, std::uint64_t seed, const std::string& level) {
  const Eigen::MatrixXd& v = intensity.values();
  double top = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double x = v.data()[k];
    if (std::isnan(x)) continue;
    require(x >= 0.0, ErrorCode::NegativeIntensity, "intensity field has negative values");
    top = std::max(top, x);
  }
  const Window& window = intensity.window();
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(poisson_draw(top * window.area(), rng));
  const Points candidates = uniform_in_window(window, n, rng);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lam = intensity.cell_value(candidates.col(k));
    const double u = rng.uniform();
    if (!std::isnan(lam) && u * top < lam) keep.push_back(k);
  }
  Points pts(2, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) pts.col(static_cast<Eigen::Index>(k)) = candidates.col(keep[k]);
  return from_points(std::move(pts), window, level);
}

MultitypePattern simulate_csri(const Window& window, const std::vector<std::pair<std::string, double>>& intensities,
                               std::uint64_t seed) {
  require(!intensities.empty(), ErrorCode::InvalidArgument, "no component intensities given");
  std::vector<MultitypePattern> parts;
  for (std::size_t m = 0; m < intensities.size(); ++m) {
    Rng rng = Rng::for_replicate(seed, m);
    require(intensities[m].second >= 0.0, ErrorCode::NegativeIntensity, "intensity must be non-negative");
    const auto n = static_cast<Eigen::Index>(poisson_draw(intensities[m].second * window.area(), rng));
    parts.push_back(from_points(uniform_in_window(window, n, rng), window, intensities[m].first));
  }
  MultitypePattern out = superpose(parts);
  out.window = window;
  return out;
}

MultitypePattern permute_labels(const MultitypePattern& pattern, Rng& rng) {
  require(pattern.type_count() >= 2, ErrorCode::SingleType, "random labelling needs at least two types");
  MultitypePattern out = pattern;
  shuffle(out.types.begin(), out.types.end(), rng);
  return out;
}

MultitypePattern permute_labels(const MultitypePattern& pattern, std::uint64_t seed) {
  Rng rng(seed);
  return permute_labels(pattern, rng);
}

Point2 disc_shift(double radius, Rng& rng) {
  const double rho = radius * std::sqrt(rng.uniform());
  const double theta = 2.0 * kPi * rng.uniform();
  return {rho * std::cos(theta), rho * std::sin(theta)};
}

ShiftResult random_shift(const MultitypePattern& pattern, const std::string& moving, double max_radius,
                         std::uint64_t seed, const ScalarField* field, std::optional<Point2> forced_shift,
                         const Window* eroded) {
  require(max_radius > 0.0, ErrorCode::InvalidArgument, "shift radius must be positive");
  const int t = pattern.type_index(moving);
  const Window wc = eroded ? *eroded : erode(pattern.window, max_radius);
  Point2 v;
  if (forced_shift) {
    v = *forced_shift;
  } else {
    Rng rng(seed);
    v = disc_shift(max_radius, rng);
  }
  MultitypePattern moved = pattern;
  for (Eigen::Index k = 0; k < moved.size(); ++k) {
    if (moved.types[static_cast<std::size_t>(k)] == t) moved.points.col(k) += v;
  }
  const MultitypePattern kept = restrict(moved, WindowSelector{wc});
  const auto before = pattern.type_counts();
  const auto after = kept.type_counts();
  for (std::size_t m = 0; m < before.size(); ++m) {
    require(before[m] == 0 || after[m] > 0, ErrorCode::EmptyAfterRestriction,
            "no '" + pattern.type_levels[m] + "' points remain in the eroded window");
  }
  ShiftResult out{kept, std::nullopt, v};
  if (field) out.field = field->resampled(wc, GridSpec::over(wc, field->grid().nx, field->grid().ny), v);
  return out;
}

MultitypePattern simulate_thomas(const Window& window, double kappa, double mu, double sigma, std::uint64_t seed,
                                 const std::string& level) {
  require(kappa > 0.0 && mu > 0.0 && sigma > 0.0, ErrorCode::NonPositiveParameter,
          "Thomas parameters must be positive");
  Rng rng(seed);
  const Box2& box = window.bbox();
  const Point2 lo = box.min() - Point2::Constant(4 * sigma);
  const Point2 span = box.sizes() + Point2::Constant(8 * sigma);
  const auto parents = poisson_draw(kappa * span.prod(), rng);
  std::vector<Point2> kept;
  for (std::uint64_t p = 0; p < parents; ++p) {
    const Point2 c(lo.x() + span.x() * rng.uniform(), lo.y() + span.y() * rng.uniform());
    const auto kids = poisson_draw(mu, rng);
    for (std::uint64_t q = 0; q < kids; ++q) {
      const double dx = sigma * normal_draw(rng);
      const double dy = sigma * normal_draw(rng);
      const Point2 u = c + Point2(dx, dy);
      if (window.contains(u)) kept.push_back(u);
    }
  }
  Points pts(2, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) pts.col(static_cast<Eigen::Index>(k)) = kept[k];
  return from_points(std::move(pts), window, level);
}

std::string to_string(NullKind kind) {
  switch (kind) {
    case NullKind::Csr: return "csr";
    case NullKind::InhomPoisson: return "inhomPoisson";
    case NullKind::RandomLabel: return "randomLabel";
    case NullKind::RandomShift: return "randomShift";
    case NullKind::Thomas: return "thomas";
  }
  return "?";
}

NullKind parse_null_kind(std::string_view text) {
  for (NullKind k : {NullKind::Csr, NullKind::InhomPoisson, NullKind::RandomLabel, NullKind::RandomShift, NullKind::Thomas}) {
    if (to_string(k) == text) return k;
  }
  fail(ErrorCode::InvalidArgument, "unknown null model '" + std::string(text) + "'");
}

nlohmann::json to_json(const NullSpec& s) {
  nlohmann::json j = {{"kind", to_string(s.kind)}, {"intensity", s.intensity}, {"moving", s.moving},
                      {"kappa", s.kappa},         {"mu", s.mu},               {"sigma", s.sigma},
                      {"seed", s.seed}};
  j["shift_radius"] = s.shift_radius ? nlohmann::json(*s.shift_radius) : nlohmann::json(nullptr);
  return j;
}

NullSpec null_spec_from_json(const nlohmann::json& j) {
  NullSpec s;
  s.kind = parse_null_kind(j.value("kind", std::string("randomLabel")));
  s.intensity = j.value("intensity", 0.0);
  s.moving = j.value("moving", std::string());
  s.kappa = j.value("kappa", 0.0);
  s.mu = j.value("mu", 0.0);
  s.sigma = j.value("sigma", 0.0);
  s.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("shift_radius") && !j["shift_radius"].is_null()) s.shift_radius = j["shift_radius"].get<double>();
  return s;
}

}  // namespace cellpp
