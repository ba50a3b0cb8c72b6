#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "stylecloak/attack.hpp"
#include "stylecloak/defense.hpp"
#include "stylecloak/losses.hpp"
#include "stylecloak/metrics.hpp"

namespace stylecloak {

using ordered_json = nlohmann::ordered_json;

// Serializes with keys in insertion order and floating values printed with
// 9 significant digits, so identical runs produce identical bytes.
std::string dump_manifest_json(const ordered_json& j);

ordered_json to_json(const LossBreakdown& b);
ordered_json to_json(const PerceptualReport& r);
ordered_json to_json(const AttackConfig& cfg);
ordered_json to_json(const DefenseSpec& spec);
ordered_json to_json(const RobustnessReport& rep);

// FNV-1a over the canonical config serialization, as 16 hex digits.
std::string config_digest(const AttackConfig& cfg);

// One manifest line (no trailing newline).
std::string manifest_line(const BatchItemSummary& item,
                          const std::string& digest);

// Parse helpers for config files / manifests; throw InvalidParameterError
// with the offending key on unknown or ill-typed entries.
AttackConfig attack_config_from_json(const ordered_json& j);

}  // namespace stylecloak
