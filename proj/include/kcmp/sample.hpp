#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "kcmp/raster.hpp"

namespace kcmp {

/// One suspected image.
struct SampleRecord {
  std::string sample_id;
  std::string image_path;   // resolved against the manifest directory when relative
  std::string image_bytes;  // in-memory alternative to image_path
  std::optional<int> label;  // 1 member, 0 non-member
  std::string source;
  std::optional<std::string> date;  // YYYY-MM-DD
  std::map<std::string, std::string> meta;

  /// Raw encoded bytes, from memory or disk.
  std::string load_bytes(const std::filesystem::path& base_dir = {}) const;
  RgbImage load(const std::filesystem::path& base_dir = {}) const;

  nlohmann::json to_json() const;
  static SampleRecord from_json(const nlohmann::json& j);
};

/// Sample ids double as file names: [A-Za-z0-9._-], non-empty, not "." or "..".
void validate_sample_id(const std::string& id);

}  // namespace kcmp
