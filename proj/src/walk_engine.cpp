#include "kbrw/walk_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kbrw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MomentReport to_report(const MomentAccumulator& acc, MomentSource source) {
  MomentReport r;
  r.value = acc.mean();
  r.std_error = acc.stderr_mean();
  r.source = source;
  r.reps = acc.count + acc.censored;
  r.censored = acc.censored;
  r.censoring_warning = r.reps > 0 && acc.censored * 100 > r.reps;
  return r;
}

template <class Value>
MomentReport mc_walks(const StepSampler& steps, double start, double lower, double upper,
                      const McOptions& opts, Value value) {
  if (opts.reps == 0) fail(ErrorKind::validation, "reps must be >= 1");
  const auto acc = replicate<MomentAccumulator>(opts.reps, opts.schedule, [&] {
    return [&steps, start, lower, upper, &opts, value](MomentAccumulator& a, std::uint64_t rep) {
      Rng rng(opts.seed, rep);
      const WalkFunctionals w = simulate_walk(steps, start, lower, upper, std::nullopt, rng, opts.max_steps);
      if (w.censored) {
        ++a.censored;
        return;
      }
      a.add(value(w));
    };
  });
  return to_report(acc, MomentSource::direct_mc);
}

}  // namespace

WalkFunctionals simulate_walk(const StepSampler& steps, double start, double lower, double upper,
                              const std::optional<AffineMap>& transform, Rng& rng,
                              std::uint64_t max_steps) {
  if (!(lower <= start && start <= upper))
    fail(ErrorKind::validation, "walk: start must satisfy lower <= start <= upper");
  if (max_steps == 0) fail(ErrorKind::validation, "walk: max_steps must be > 0");

  const bool green = transform.has_value() && std::isfinite(lower) && std::isfinite(upper);
  double r_lo = 0.0;
  double r_hi = 0.0;
  if (green) {
    r_lo = std::min((*transform)(lower), (*transform)(upper));
    r_hi = std::max((*transform)(lower), (*transform)(upper));
  }
  const double width = r_hi - r_lo;
  double sum_top = 0.0;
  double sum_bottom = 0.0;
  auto accumulate = [&](double s) {
    const double rel = (*transform)(s) - r_lo;
    const double decay = std::exp(-rel);
    sum_top += decay * (rel + 1.0);
    sum_bottom += decay * (width - rel + 1.0);
  };

  WalkFunctionals out;
  double s = start;
  if (green) accumulate(s);
  std::uint64_t n = 0;
  for (;;) {
    if (n == max_steps) {
      out.censored = true;
      out.steps_taken = n;
      out.final_position = s;
      return out;
    }
    s += steps(rng);
    ++n;
    if (s > upper || s < lower) break;
    if (green) accumulate(s);
  }
  if (green) accumulate(s);

  out.steps_taken = n;
  out.final_position = s;
  if (s > upper) {
    out.exit = Exit::top;
    out.overshoot = s - upper;
  } else {
    out.exit = Exit::bottom;
    out.undershoot = lower - s;
  }
  if (green) {
    const double r = (*transform)(s);
    if (r > r_hi)
      out.green_top = std::exp(r - r_hi) * sum_top;
    else
      out.green_bottom = std::exp(r - r_lo) * sum_bottom;
  }
  return out;
}

WalkFunctionals run_two_barrier_walk(const StepSampler& steps, double start, double lower,
                                     double upper, const std::optional<AffineMap>& transform,
                                     Rng& rng, std::uint64_t max_steps) {
  WalkFunctionals w = simulate_walk(steps, start, lower, upper, transform, rng, max_steps);
  if (w.censored) throw CensoredWalkError(w);
  return w;
}

double exact_hitting_probability(const LatticeStrip& strip, int z) {
  if (!strip.contains(z)) fail(ErrorKind::validation, "hitting probability: start outside strip");
  const StripSolver solver(strip);
  const auto h = solver.solve(exit_flux(strip, Side::top, [](int) { return 1.0; }));
  return h[static_cast<std::size_t>(strip.index(z))];
}

std::vector<double> expected_visits(const LatticeStrip& strip, int start) {
  if (!strip.contains(start)) fail(ErrorKind::validation, "expected visits: start outside strip");
  const StripSolver solver(strip);
  std::vector<double> unit(static_cast<std::size_t>(strip.size()), 0.0);
  unit[static_cast<std::size_t>(strip.index(start))] = 1.0;
  return solver.solve_transposed(unit);
}

double exact_green_sum(const LatticeStrip& strip, int start, const GreenSpec& spec) {
  if (!strip.contains(start)) fail(ErrorKind::validation, "green sum: start outside strip");
  if (!spec.exit_weight || !spec.path_weight) fail(ErrorKind::validation, "green sum: weights unset");
  const StripSolver solver(strip);

  // v(j) = E^j[exit_weight; side]; the visit at l contributes path(S_l) v(S_l),
  // the exit position contributes exit_weight * path at S_tau.
  const auto v = solver.solve(exit_flux(strip, spec.side, spec.exit_weight));
  auto rhs = exit_flux(strip, spec.side,
                       [&](int y) { return spec.exit_weight(y) * spec.path_weight(y); });
  for (int z = strip.lower; z <= strip.upper; ++z) {
    const auto i = static_cast<std::size_t>(strip.index(z));
    rhs[i] += spec.path_weight(z) * v[i];
  }
  const auto w = solver.solve(rhs);
  return w[static_cast<std::size_t>(strip.index(start))];
}

double exact_green_quantity(const LatticeLaw& law, int k, int x, GreenQuantity which) {
  if (k < 0) fail(ErrorKind::validation, "green quantity: k must be >= 0");
  if (x < 0 || x > k) fail(ErrorKind::validation, "green quantity: x must lie in [0, k]");
  const LatticeStrip strip(0, k, law);
  const double kk = static_cast<double>(k);
  switch (which) {
    case GreenQuantity::zero_to_top:
    case GreenQuantity::near_top_to_top: {
      GreenSpec spec{Side::top, [kk](int y) { return std::exp(y - kk); },
                     [](int r) { return std::exp(-r) * (r + 1.0); }};
      return exact_green_sum(strip, which == GreenQuantity::zero_to_top ? 0 : k - x, spec);
    }
    case GreenQuantity::near_top_to_bottom: {
      GreenSpec spec{Side::bottom, [](int y) { return std::exp(static_cast<double>(y)); },
                     [kk](int r) { return std::exp(-r) * (kk - r + 1.0); }};
      return exact_green_sum(strip, k - x, spec);
    }
  }
  return 0.0;
}

double scaled_green_quantity(const LatticeLaw& law, int k, int x, GreenQuantity which) {
  const double v = exact_green_quantity(law, k, x, which);
  const double kk = static_cast<double>(k);
  switch (which) {
    case GreenQuantity::zero_to_top: return v * kk;
    case GreenQuantity::near_top_to_top: return v * kk * kk / (1.0 + x);
    case GreenQuantity::near_top_to_bottom: return v / (1.0 + x);
  }
  return v;
}

MomentReport estimate_boundary_moments(const StepSampler& steps, double level, Side side,
                                       const McOptions& opts, double theta) {
  if (side == Side::top) {
    if (level < 0.0) fail(ErrorKind::validation, "overshoot moment: level must be >= 0");
    return mc_walks(steps, 0.0, -kInf, level, opts,
                    [](const WalkFunctionals& w) { return std::exp(*w.overshoot); });
  }
  if (level > 0.0) fail(ErrorKind::validation, "undershoot moment: level must be <= 0");
  return mc_walks(steps, 0.0, level, kInf, opts,
                  [theta](const WalkFunctionals& w) { return std::exp(theta * *w.undershoot); });
}

MomentReport estimate_passage_constant(const StepSampler& steps, double x, const McOptions& opts) {
  if (x < 0.0) fail(ErrorKind::validation, "passage constant: x must be >= 0");
  return mc_walks(steps, x, 0.0, kInf, opts,
                  [x](const WalkFunctionals& w) { return x + *w.undershoot; });
}

MomentReport estimate_hitting_probability(const StepSampler& steps, double start, double lower,
                                          double upper, const McOptions& opts) {
  return mc_walks(steps, start, lower, upper, opts,
                  [](const WalkFunctionals& w) { return w.exit == Exit::top ? 1.0 : 0.0; });
}

}  // namespace kbrw
