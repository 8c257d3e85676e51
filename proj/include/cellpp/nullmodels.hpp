#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "cellpp/field.hpp"
#include "cellpp/pattern.hpp"
#include "cellpp/random.hpp"

namespace cellpp {

/// Poisson variate; exact inversion for small means, PTRS rejection otherwise.
std::uint64_t poisson_draw(double mean, Rng& rng);
/// Standard normal variate (Box-Muller).
double normal_draw(Rng& rng);

/// n points uniform in the window (rejection from the bounding box).
Points uniform_in_window(const Window& window, Eigen::Index n, Rng& rng);

MultitypePattern simulate_poisson(const Window& window, double intensity, std::uint64_t seed,
                                  const std::string& level = "points");
/// Thinning of a dominating homogeneous process; lambda(u) is the value of the
/// field cell containing u, NaN read as 0.
MultitypePattern simulate_poisson(const ScalarField& intensity, std::uint64_t seed,
                                  const std::string& level = "points");
/// Independent homogeneous components, one per level (CSRI).
MultitypePattern simulate_csri(const Window& window, const std::vector<std::pair<std::string, double>>& intensities,
                               std::uint64_t seed);

/// Uniform random permutation of type labels over fixed locations; tissue
/// labels and marks stay with their locations.
MultitypePattern permute_labels(const MultitypePattern& pattern, std::uint64_t seed);
MultitypePattern permute_labels(const MultitypePattern& pattern, Rng& rng);

/// Uniform on the disc of the given radius.
Point2 disc_shift(double radius, Rng& rng);

struct ShiftResult {
  MultitypePattern pattern;  // restricted to the eroded window
  std::optional<ScalarField> field;  // moving type's intensity, translated
  Point2 shift;
};

/// Translates X(moving) by v (drawn uniformly on the disc unless forced) and
/// restricts everything to erode(W, max_radius). `eroded` may carry that
/// window when the caller already has it.
ShiftResult random_shift(const MultitypePattern& pattern, const std::string& moving, double max_radius,
                         std::uint64_t seed, const ScalarField* field = nullptr,
                         std::optional<Point2> forced_shift = std::nullopt,
                         const Window* eroded = nullptr);

MultitypePattern simulate_thomas(const Window& window, double kappa, double mu, double sigma, std::uint64_t seed,
                                 const std::string& level = "points");

enum class NullKind { Csr, InhomPoisson, RandomLabel, RandomShift, Thomas };
std::string to_string(NullKind kind);
NullKind parse_null_kind(std::string_view text);

struct NullSpec {
  NullKind kind = NullKind::RandomLabel;
  double intensity = 0.0;
  /// Random shifts: maximal displacement; unset means r0.
  std::optional<double> shift_radius;
  /// Random shifts: the translated type.
  std::string moving;
  double kappa = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 1;
};

nlohmann::json to_json(const NullSpec& spec);
NullSpec null_spec_from_json(const nlohmann::json& j);

}  // namespace cellpp
