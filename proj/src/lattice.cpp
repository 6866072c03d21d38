#include "kbrw/lattice.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "kbrw/error.hpp"

namespace kbrw {

LatticeStrip::LatticeStrip(int lower_, int upper_, LatticeLaw law_, int max_states_)
    : lower(lower_), upper(upper_), law(std::move(law_)), max_states(max_states_) {
  if (lower > upper) fail(ErrorKind::validation, "strip: lower barrier above upper barrier");
  if (law.probs.empty()) fail(ErrorKind::validation, "strip: empty step law");
  if (size() > max_states)
    fail(ErrorKind::resource, "strip: " + std::to_string(size()) + " states exceed the cap of " +
                                  std::to_string(max_states));
}

struct StripSolver::Impl {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  Eigen::VectorXd scaling;  // D
};

StripSolver::StripSolver(const LatticeStrip& strip, double scale, double rate)
    : strip_(strip), rate_(rate), impl_(std::make_unique<Impl>()) {
  const int n = strip.size();
  const LatticeLaw& law = strip.law;

  bool degenerate = true;
  for (std::size_t i = 0; i < law.probs.size(); ++i)
    if (law.probs[i] > 0.0 && law.min_offset + static_cast<int>(i) != 0) degenerate = false;
  if (degenerate) fail(ErrorKind::convergence, "strip: step law never moves, system is singular");

  impl_->scaling.resize(n);
  for (int i = 0; i < n; ++i) impl_->scaling[i] = std::exp(rate * i);
  if (!std::isfinite(impl_->scaling[n - 1]) || (rate != 0.0 && impl_->scaling[n - 1] > 1e300))
    fail(ErrorKind::resource, "strip: solution scale exp(rate * width) overflows double range");

  // A = D^{-1} (I - scale Q) D, so A_ij = delta_ij - scale Q_ij e^{rate (j - i)}.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < law.probs.size(); ++s) {
      const double q = law.probs[s];
      if (q == 0.0) continue;
      const int offset = law.min_offset + static_cast<int>(s);
      const int j = i + offset;
      if (j < 0 || j >= n) continue;
      a(i, j) -= scale * q * std::exp(rate * offset);
    }
  }
  impl_->lu.compute(a);
  const double rcond = impl_->lu.rcond();
  if (!(rcond > 1e-15)) fail(ErrorKind::convergence, "strip: singular system");
}

StripSolver::~StripSolver() = default;
StripSolver::StripSolver(StripSolver&&) noexcept = default;
StripSolver& StripSolver::operator=(StripSolver&&) noexcept = default;

std::vector<double> StripSolver::solve(const std::vector<double>& rhs) const {
  const int n = strip_.size();
  if (static_cast<int>(rhs.size()) != n) fail(ErrorKind::validation, "strip: rhs size mismatch");
  // (I - sQ) m = r  <=>  A w = D^{-1} r with m = D w.
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r[i] = rhs[static_cast<std::size_t>(i)] / impl_->scaling[i];
  const Eigen::VectorXd w = impl_->lu.solve(r);
  std::vector<double> m(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = w[i] * impl_->scaling[i];
  return m;
}

std::vector<double> StripSolver::solve_transposed(const std::vector<double>& rhs) const {
  const int n = strip_.size();
  if (static_cast<int>(rhs.size()) != n) fail(ErrorKind::validation, "strip: rhs size mismatch");
  // (I - sQ)^T m = r  <=>  A^T w = D r with m = D^{-1} w.
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r[i] = rhs[static_cast<std::size_t>(i)] * impl_->scaling[i];
  const Eigen::VectorXd w = impl_->lu.transpose().solve(r);
  std::vector<double> m(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = w[i] / impl_->scaling[i];
  return m;
}

std::vector<double> exit_flux(const LatticeStrip& strip, Side side,
                              const std::function<double(int)>& f) {
  std::vector<double> out(static_cast<std::size_t>(strip.size()), 0.0);
  for (int z = strip.lower; z <= strip.upper; ++z) {
    double acc = 0.0;
    for (std::size_t s = 0; s < strip.law.probs.size(); ++s) {
      const double q = strip.law.probs[s];
      if (q == 0.0) continue;
      const int y = z + strip.law.min_offset + static_cast<int>(s);
      if ((side == Side::top && y > strip.upper) || (side == Side::bottom && y < strip.lower))
        acc += q * f(y);
    }
    out[static_cast<std::size_t>(strip.index(z))] = acc;
  }
  return out;
}

}  // namespace kbrw
