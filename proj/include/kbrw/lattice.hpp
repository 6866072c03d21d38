#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "kbrw/step_model.hpp"

namespace kbrw {

/// Default cap on the number of interior states of an exact solve.
inline constexpr int kMaxStripStates = 5000;

/// Integer strip {lower, ..., upper} for a walk with integer steps. A step
/// leaving the strip is absorbed: below when the new position is < lower,
/// above when it is > upper.
struct LatticeStrip {
  int lower = 0;
  int upper = 0;
  LatticeLaw law;
  int max_states = kMaxStripStates;

  LatticeStrip(int lower_, int upper_, LatticeLaw law_, int max_states_ = kMaxStripStates);

  int size() const { return upper - lower + 1; }
  bool contains(int z) const { return z >= lower && z <= upper; }
  int index(int z) const { return z - lower; }
};

/// Factorization of I - scale * Q, with Q the substochastic transition
/// matrix of the strip. The system is solved after the diagonal similarity
/// D = diag(exp(rate * (y - lower))), which keeps the entries O(1) when the
/// solution grows like exp(rate * y); pass rate = 0 for the plain system.
class StripSolver {
 public:
  StripSolver(const LatticeStrip& strip, double scale = 1.0, double rate = 0.0);
  ~StripSolver();
  StripSolver(StripSolver&&) noexcept;
  StripSolver& operator=(StripSolver&&) noexcept;

  /// Solves (I - scale Q) m = rhs.
  std::vector<double> solve(const std::vector<double>& rhs) const;
  /// Solves (I - scale Q)^T m = rhs.
  std::vector<double> solve_transposed(const std::vector<double>& rhs) const;

  const LatticeStrip& strip() const { return strip_; }

 private:
  struct Impl;
  LatticeStrip strip_;
  double rate_;
  std::unique_ptr<Impl> impl_;
};

/// sum over steps s leaving the strip through `side`, of p(s) f(z + s),
/// evaluated for every interior z.
enum class Side { top, bottom };
std::vector<double> exit_flux(const LatticeStrip& strip, Side side,
                              const std::function<double(int)>& f);

}  // namespace kbrw
