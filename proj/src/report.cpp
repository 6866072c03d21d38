#include "kbrw/report.hpp"

#include <algorithm>
#include <cmath>

namespace kbrw {

const char* to_string(MomentSource source) {
  switch (source) {
    case MomentSource::direct_mc: return "direct_mc";
    case MomentSource::many_to_one_is: return "many_to_one_is";
    case MomentSource::exact_lattice: return "exact_lattice";
  }
  return "unknown";
}

bool agree(const MomentReport& a, const MomentReport& b, double sigmas) {
  const double scale = std::max(std::abs(a.value), std::abs(b.value));
  const double combined = std::hypot(a.spread(), b.spread());
  return std::abs(a.value - b.value) <= sigmas * combined + 1e-9 * scale;
}

}  // namespace kbrw
