#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>

#include "kbrw/error.hpp"
#include "kbrw/lattice.hpp"
#include "kbrw/parallel.hpp"
#include "kbrw/report.hpp"
#include "kbrw/rng.hpp"
#include "kbrw/step_model.hpp"

namespace kbrw {

inline constexpr std::uint64_t kDefaultMaxWalkSteps = 100'000'000;

enum class Exit { top, bottom };

/// R = scale * S + offset; the coordinates in which the Green sums are taken.
struct AffineMap {
  double scale = 1.0;
  double offset = 0.0;

  double operator()(double s) const { return scale * s + offset; }
};

/// Outcome of one walk started inside [lower, upper] and run until it leaves
/// (exit top: S > upper, exit bottom: S < lower).
///
/// The Green sums are taken in R-coordinates with barriers r_lo < r_hi (the
/// images of lower/upper) and relative position R' = R - r_lo, width
/// w = r_hi - r_lo, summing over l = 0..tau including the exit position:
///   green_top    = e^{U_R}  * sum_l e^{-R'_l} (R'_l + 1)       (R exits above r_hi)
///   green_bottom = e^{-L_R} * sum_l e^{-R'_l} (w - R'_l + 1)   (R exits below r_lo)
/// with U_R, L_R the overshoot/undershoot of R. For an orientation-reversing
/// transform, an S exit at the top is an R exit at the bottom.
struct WalkFunctionals {
  Exit exit = Exit::top;
  std::uint64_t steps_taken = 0;
  std::optional<double> overshoot;   // S_tau - upper, exit == top
  std::optional<double> undershoot;  // lower - S_tau, exit == bottom
  std::optional<double> green_top;
  std::optional<double> green_bottom;
  double final_position = 0.0;
  bool censored = false;  // max_steps reached; only `final_position`/`steps_taken` valid
};

/// Thrown by run_two_barrier_walk when max_steps is exceeded.
class CensoredWalkError : public Error {
 public:
  explicit CensoredWalkError(WalkFunctionals partial)
      : Error(ErrorKind::resource, "walk censored: max_steps exceeded"), partial_(partial) {}
  const WalkFunctionals& partial() const { return partial_; }

 private:
  WalkFunctionals partial_;
};

/// Non-throwing core: a censored walk is reported through `censored`.
/// Either barrier may be infinite (one-sided walk); Green sums need both finite
/// and a transform.
WalkFunctionals simulate_walk(const StepSampler& steps, double start, double lower, double upper,
                              const std::optional<AffineMap>& transform, Rng& rng,
                              std::uint64_t max_steps = kDefaultMaxWalkSteps);

/// As simulate_walk, but censoring throws CensoredWalkError.
WalkFunctionals run_two_barrier_walk(const StepSampler& steps, double start, double lower,
                                     double upper, const std::optional<AffineMap>& transform,
                                     Rng& rng, std::uint64_t max_steps = kDefaultMaxWalkSteps);

// ---------------------------------------------------------------------------
// Exact absorbing-chain quantities on an integer strip.

/// P^z(exit above upper before below lower).
double exact_hitting_probability(const LatticeStrip& strip, int z);

/// Row `start` of the fundamental matrix N = (I - Q)^{-1}: expected visits to
/// each interior state before absorption.
std::vector<double> expected_visits(const LatticeStrip& strip, int start);

/// E^start[ exit_weight(S_tau) * sum_{l=0}^{tau} path_weight(S_l) ; exit on `side` ].
struct GreenSpec {
  Side side = Side::top;
  std::function<double(int)> exit_weight;
  std::function<double(int)> path_weight;
};
double exact_green_sum(const LatticeStrip& strip, int start, const GreenSpec& spec);

/// The three weighted sums bounding the branching moments, for a centered
/// integer walk R on the strip [0, k]:
///   zero_to_top:        E^0    [e^{U_k} sum e^{-R}(R+1)     ; tau_k^+ < tau_0^-]   ~ 1/k
///   near_top_to_top:    E^{k-x}[e^{U_k} sum e^{-R}(R+1)     ; tau_k^+ < tau_0^-]   ~ (1+x)/k^2
///   near_top_to_bottom: E^{k-x}[e^{-L_0} sum e^{-R}(k-R+1)  ; tau_0^- < tau_k^+]   ~ 1+x
enum class GreenQuantity { zero_to_top, near_top_to_top, near_top_to_bottom };
double exact_green_quantity(const LatticeLaw& law, int k, int x, GreenQuantity which);
/// The quantity times k, k^2/(1+x) or 1/(1+x) respectively.
double scaled_green_quantity(const LatticeLaw& law, int k, int x, GreenQuantity which);

// ---------------------------------------------------------------------------
// Monte Carlo boundary functionals.

struct McOptions {
  std::uint64_t reps = 100'000;
  std::uint64_t seed = 0;
  std::uint64_t max_steps = kDefaultMaxWalkSteps;
  Schedule schedule{};
};

/// side == top:    E^0[e^{U_level}], level >= 0, walk from 0 with no lower barrier.
/// side == bottom: E^0[e^{theta L_level}], level <= 0, no upper barrier.
MomentReport estimate_boundary_moments(const StepSampler& steps, double level, Side side,
                                       const McOptions& opts, double theta = 1.0);

/// c(x) = x + E^x[L_0], the constant in P^x(tau_k^+ < tau_0^-) ~ c(x)/k.
MomentReport estimate_passage_constant(const StepSampler& steps, double x, const McOptions& opts);

/// Fraction of walks from `start` exiting above `upper` before below `lower`.
MomentReport estimate_hitting_probability(const StepSampler& steps, double start, double lower,
                                          double upper, const McOptions& opts);

}  // namespace kbrw
