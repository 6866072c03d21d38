#pragma once

#include <cstdint>
#include <string>

namespace kbrw {

enum class MomentSource { direct_mc, many_to_one_is, exact_lattice };

const char* to_string(MomentSource source);

/// One estimate of a moment-type quantity with its provenance.
struct MomentReport {
  double value = 0.0;
  /// Standard error for Monte Carlo sources; 0 for exact ones.
  double std_error = 0.0;
  /// Solver tolerance for exact sources.
  double tolerance = 0.0;
  MomentSource source = MomentSource::direct_mc;
  std::uint64_t reps = 0;
  std::uint64_t censored = 0;
  /// Set when more than 1% of replications were censored.
  bool censoring_warning = false;
  /// value times the normalization under which it should stay in a band.
  double scaled = 0.0;

  /// Combined uncertainty scale used to compare two estimates.
  double spread() const { return std_error > tolerance ? std_error : tolerance; }
};

/// |a - b| <= sigmas * sqrt(spread_a^2 + spread_b^2), with an absolute floor
/// for two exact reports of relative size 1e-9.
bool agree(const MomentReport& a, const MomentReport& b, double sigmas = 3.0);

}  // namespace kbrw
