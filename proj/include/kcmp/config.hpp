#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcmp/attack.hpp"

namespace kcmp {

/// Parses the TOML subset used by config files: comments, `[table]`,
/// `[[array-of-tables]]`, and `key = value` with strings, integers, floats,
/// booleans and flat arrays of those. Anything else raises InvalidInput.
nlohmann::json parse_toml(std::string_view text);

struct EndpointConfig {
  std::string base_url;
  std::string model;
  double requests_per_minute = 0.0;  // 0 = unthrottled
  double timeout_seconds = 60.0;
};

struct RunConfig {
  std::string manifest;
  std::string workdir = "kcmp-work";
  std::string cache_dir;  // empty: <workdir>/cache

  AttackConfig attack;

  std::map<std::string, EndpointConfig> endpoints;  // keyed by role name

  std::vector<int> set_sizes{1, 10, 30};
  int set_trials = 2000;

  void validate() const;
  std::filesystem::path cache_path() const;

  nlohmann::json to_json() const;
  /// Overrides fields present in `j` (the layout of to_json or a TOML file).
  void apply(const nlohmann::json& j);
};

RunConfig load_run_config(const std::filesystem::path& file, RunConfig base = {});

}  // namespace kcmp
