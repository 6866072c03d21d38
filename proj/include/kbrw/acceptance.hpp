#pragma once

#include <cstdint>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace kbrw {

/// Pinned thresholds of the acceptance suite.
struct AcceptanceTolerances {
  double calibration = 1e-6;
  double calibration_seconds = 1.0;
  double sigmas = 3.0;
  double exact_identity = 1e-12;
  double exact_band = 2.0;
  double green_band = 2.0;
  double tail_band = 4.0;
  double two_stage_band = 3.0;
  double tail_minutes = 30.0;
};

struct AcceptanceOptions {
  int workers = 1;
  std::uint64_t seed = 0x6b627277ULL;
  std::set<int> only;  // empty: all criteria
  AcceptanceTolerances tol{};
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs criteria 1..9, writing one "PASS"/"FAIL" line per criterion to `log`
/// as each finishes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, std::ostream& log);

bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace kbrw
