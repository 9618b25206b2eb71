#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "acesearcher/domain.hpp"

namespace acesearcher {

/// Config files are flat JSON objects keyed by RunConfig field names.
/// Overrides are `key=value`; the value is read as JSON when it parses and as
/// a bare string otherwise. Unknown keys, wrong types and invariant
/// violations throw Error(invalid_argument).
RunConfig parse_config(const std::optional<std::filesystem::path>& path,
                       std::span<const std::string> overrides = {});

void apply_config_value(RunConfig& config, std::string_view key, const nlohmann::json& value);
std::vector<std::string> config_keys();
nlohmann::json config_to_json(const RunConfig& config);

}  // namespace acesearcher
