#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "granular/bgl.hpp"
#include "granular/cumulants.hpp"
#include "granular/kinetic.hpp"

namespace granular {

using Json = nlohmann::json;

/// %.17g, the round-trip form used in every CSV.
std::string format_double(double x);

/// FNV-1a over the canonical (sorted-key, compact) dump, as 16 hex digits.
std::string config_hash(const Json& config);

/// Writes `content` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& content);

Json to_json(const Estimate& e);
Json to_json(const Moments& m);
Json to_json(const DualityResult& r);
Json to_json(const BgStudyConfig& c);
Json to_json(const ChaosReport& r);

/// One row per (sigma, t) with every ChaosPoint field.
std::string chaos_csv(const ChaosReport& r);

} // namespace granular
