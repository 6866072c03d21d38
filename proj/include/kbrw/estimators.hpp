#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kbrw/brw_engine.hpp"
#include "kbrw/parallel.hpp"
#include "kbrw/report.hpp"
#include "kbrw/step_model.hpp"
#include "kbrw/walk_engine.hpp"

namespace kbrw {

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for a binomial proportion.
WilsonInterval wilson_ci(std::uint64_t hits, std::uint64_t reps, double z = 1.96);

enum class TailStat { progeny, maximum };

/// Empirical survival function on a threshold grid.
///
/// Progeny: hits count Z > n. Maximum: hits count M >= k. A censored run
/// certifies exceedance of every threshold below its counted value; at larger
/// thresholds it is dropped from that threshold's denominator and reported in
/// `excluded`. Counts are integers, so merge() is exact and order-free.
struct TailCurve {
  TailStat stat = TailStat::progeny;
  std::vector<double> thresholds;
  std::vector<std::uint64_t> hits;
  std::vector<std::uint64_t> trials;
  std::vector<std::uint64_t> excluded;
  std::uint64_t reps = 0;
  std::uint64_t censored_reps = 0;

  /// Exact curves (fixed-point oracle) carry probabilities instead of counts.
  bool exact = false;
  std::vector<double> exact_p;

  /// Start position and tilt point used by the scaled statistic.
  double x = 0.0;
  double rho = 0.0;

  void init(TailStat s, std::vector<double> grid);
  /// Tally one replication whose statistic is `value` (certified lower bound
  /// when `censored`).
  void tally(double value, bool censored);
  void merge(const TailCurve& other);

  std::size_t size() const { return thresholds.size(); }
  double p_hat(std::size_t i) const;
  WilsonInterval ci(std::size_t i, double z = 1.96) const;
  /// n ln^2(n) p / ((1+x) e^{rho x}) for progeny, k e^{rho (k-x)} p / (1+x) for maximum.
  double scaled(std::size_t i) const;
  double scale_factor(std::size_t i) const;
};

struct TreeMcOptions {
  std::uint64_t reps = 100'000;
  std::uint64_t seed = 0;
  Schedule schedule{};
  BrwCaps caps{};
  std::uint64_t max_walk_steps = kDefaultMaxWalkSteps;
};

/// P^x(Z > n) over `n_grid` (ascending, max <= caps.max_total_counted).
/// Runs stop as soon as Z exceeds the largest threshold.
TailCurve tail_curve_Z(const StepModel& model, double x, const std::vector<double>& n_grid,
                       const TreeMcOptions& opts);

/// P^x(M >= k) over `k_grid` by direct simulation.
TailCurve tail_curve_M(const StepModel& model, double x, const std::vector<double>& k_grid,
                       const TreeMcOptions& opts);

/// P^x(M >= k) from the strip-survival fixed point (lattice models, integer k >= x).
TailCurve tail_curve_M_exact(const StepModel& model, int x, const std::vector<int>& k_grid,
                             std::uint64_t max_sweeps = 1'000'000);

// ---------------------------------------------------------------------------
// First moments of Z(a, k) and H(k) from three independent sources.
// Scaled values: E^y[Z(a,k)] k / (e^{rho(y-a)} (1+k-y)) and E^x[H_k] k e^{rho(k-x)} / (1+x).

MomentReport moment_Zak_direct(const StepModel& model, double y, double a, double k,
                               const TreeMcOptions& opts);
/// E^y[Z(a,k)] = e^{rho(y-a)} E_Q^y[e^{rho L_a}; tau_a^- < tau_k^+], one tilted walk per sample.
MomentReport moment_Zak_many_to_one(const StepModel& model, double y, double a, double k,
                                    const TreeMcOptions& opts);
MomentReport moment_Zak_exact(const StepModel& model, int y, int a, int k);

MomentReport moment_H_direct(const StepModel& model, double x, double k, const TreeMcOptions& opts);
/// E^x[H_k] = e^{rho(x-k)} E_Q^x[e^{-rho U_k}; tau_k^+ < tau_0^-].
MomentReport moment_H_many_to_one(const StepModel& model, double x, double k,
                                  const TreeMcOptions& opts);
MomentReport moment_H_exact(const StepModel& model, int x, int k);

/// Larger root of e^{rho k} / k = n.
double choose_k_upper(const StepModel& model, double n);
/// Larger root of mu e^{rho k} / (2k) = n.
double choose_k_lower(const StepModel& model, double n, double mu);

struct StageEstimate {
  double p = 0.0;
  double std_error = 0.0;
  std::uint64_t reps = 0;
  std::uint64_t excluded = 0;
  bool exact = false;
};

/// Product-form lower-bound construction
///   P^x(Z > n) >= P^x(M >= K) * P^K(Z(a, K) > n)
/// at the level K solving mu e^{rho K}/(2K) = n, with mu estimated by the
/// many-to-one estimator at a pilot level.
struct TwoStageResult {
  double mu_hat = 0.0;
  double pilot_k = 0.0;
  double k_star = 0.0;        // real root of the level equation
  double level = 0.0;         // level actually used (lattice: an integer next to k_star)
  StageEstimate reach;        // P^x(M >= level)
  StageEstimate progeny;      // P^level(Z(a, level) > n)
  double estimate = 0.0;
  double std_error = 0.0;
  WilsonInterval ci;          // delta-method interval, clipped to [0, 1]
  bool censoring_warning = false;
  std::string label = "lower-bound-biased";
  /// n ln^2(n) estimate / ((1+x) e^{rho x}).
  double scaled = 0.0;
};

struct TwoStageOptions {
  std::uint64_t reps_stage1 = 100'000;
  std::uint64_t reps_stage2 = 2'000;
  std::uint64_t seed = 0;
  Schedule schedule{};
  BrwCaps caps{};
};

TwoStageResult two_stage_tail(const StepModel& model, double x, double a, double n,
                              const TwoStageOptions& opts);

/// max/min of positive values; +inf if any value is <= 0.
double band_ratio(const std::vector<double>& values);

}  // namespace kbrw
