#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbrw/brw_engine.hpp"
#include "kbrw/estimators.hpp"
#include "kbrw/walk_engine.hpp"

namespace kbrw {

inline constexpr const char* kVersion = "0.1.0";

/// FNV-1a 64 of the compact JSON dump; nlohmann orders object keys, so the
/// hash depends only on the config's content.
std::uint64_t config_hash(const nlohmann::json& config);
std::string hex64(std::uint64_t v);

/// First line of every CSV artifact: "# kbrw <version> config_hash=<hex>".
std::string provenance_line(const nlohmann::json& config);

/// Round-trip formatting (%.17g); stable across runs.
std::string format_double(double v);

std::string tail_curve_csv(const TailCurve& curve, const nlohmann::json& config);
std::string brw_runs_csv(const std::vector<BrwRun>& runs, const nlohmann::json& config);
std::string walks_csv(const std::vector<WalkFunctionals>& walks, const nlohmann::json& config);

nlohmann::json to_json(const MomentReport& r);
nlohmann::json to_json(const TwoStageResult& r);

}  // namespace kbrw
