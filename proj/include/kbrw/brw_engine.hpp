#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kbrw/lattice.hpp"
#include "kbrw/rng.hpp"
#include "kbrw/step_model.hpp"

namespace kbrw {

struct BrwCaps {
  std::uint64_t max_generations = 1'000'000;
  std::uint64_t max_population = 10'000'000;
  std::uint64_t max_total_counted = 1'000'000'000;
};

/// Start position and optional levels of a killed branching random walk.
/// Particles below 0 are killed. With `top_level` k, particles above k are
/// absorbed (counted in Hk, no descendants). With `count_level` a, Zak counts
/// particles below a whose strict ancestors all stayed in [a, k].
struct BrwConfig {
  double x = 0.0;
  std::optional<double> count_level;
  std::optional<double> top_level;
  BrwCaps caps{};
  /// Stop the run once Zak exceeds this value (the event is then decided).
  std::optional<std::uint64_t> stop_zak_above;

  void validate() const;
};

enum class CapKind { none, generations, population, total_counted };

const char* to_string(CapKind kind);

struct BrwRun {
  std::uint64_t Z = 0;    // alive vertices (in the strip when a top level is set)
  std::uint64_t Z0 = 0;   // children killed below 0
  std::uint64_t Zak = 0;  // first passages below a, ancestors in [a, k]
  std::uint64_t Hk = 0;   // absorptions above k, ancestors in [0, k]
  double M = 0.0;         // highest alive position
  std::uint64_t T_ext = 0;
  CapKind censored = CapKind::none;
  bool stopped = false;   // stop_zak_above reached; counts are then partial

  bool is_censored() const { return censored != CapKind::none; }
  friend bool operator==(const BrwRun&, const BrwRun&) = default;
};

/// Generation-synchronous simulator. Keeps only the current generation
/// (positions plus a flag for "still inside [a, k]"); buffers are reused
/// across runs, so one instance per worker.
class BrwSimulator {
 public:
  BrwSimulator(const StepModel& model, BrwConfig config);

  BrwRun operator()(Rng& rng);

  const BrwConfig& config() const { return config_; }

 private:
  StepSampler steps_;
  int branching_;
  BrwConfig config_;
  std::vector<double> positions_;
  std::vector<double> next_positions_;
  std::vector<std::uint8_t> in_band_;
  std::vector<std::uint8_t> next_in_band_;
};

BrwRun run_brw(const StepModel& model, const BrwConfig& config, Rng& rng);

/// Start at x = k, count below a, absorb above k: Zak is Z(a, k) from level k.
BrwRun run_brw_from_top(const StepModel& model, double a, double k, const BrwCaps& caps, Rng& rng);

// ---------------------------------------------------------------------------
// Exact recursions for integer-lattice models on the strip {a, ..., k}.

/// E^y[Z(a, k)] for every y in {a, ..., k}: m1 = b E_s[m1(y+s)], m1 = 1 below a,
/// m1 = 0 above k.
std::vector<double> exact_brw_first_moment_profile(const StepModel& model, int a, int k);
double exact_brw_first_moment(const StepModel& model, int a, int k, int y);

/// E^y[Z(a, k)^2]: m2 = b E_s[m2(y+s)] + b(b-1) (E_s[m1(y+s)])^2, m2 = 1 below a,
/// m2 = 0 above k.
std::vector<double> exact_brw_second_moment_profile(const StepModel& model, int a, int k);
double exact_brw_second_moment(const StepModel& model, int a, int k, int y);

/// E^x[H(k)] on {0, ..., k}: h = b E_s[h(y+s)], h = 0 below 0, h = 1 above k.
double exact_brw_first_moment_H(const StepModel& model, int k, int x);

/// Both routes of the first-moment solve: with the exp(rho y) similarity
/// scaling (default) and on the raw system. Used to cross-check conditioning.
std::vector<double> exact_brw_first_moment_profile_unscaled(const StepModel& model, int a, int k);

struct SurvivalSolve {
  double value = 0.0;        // P^x(M >= k)
  std::uint64_t sweeps = 0;
};

/// P^x(M >= k) = 1 - q(x), where q(y) = P^y(no alive particle ever reaches
/// level k) is the maximal fixed point of q(y) = (E_s[q~(y+s)])^b with q~ = 1
/// below 0 and q~ = 0 at or above k. Iterated on u = 1 - q from u = 0
/// (i.e. q = 1), so tail values far below machine epsilon stay accurate;
/// stops when the largest relative change of u is <= tol.
SurvivalSolve exact_strip_survival_solve(const StepModel& model, int k, int x,
                                         double tol = 1e-12,
                                         std::uint64_t max_sweeps = 1'000'000);
double exact_strip_survival(const StepModel& model, int k, int x);

}  // namespace kbrw
