#include "kcmp/sample.hpp"

#include <algorithm>
#include <cctype>

#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"

namespace kcmp {

std::string SampleRecord::load_bytes(const std::filesystem::path& base_dir) const {
  if (!image_bytes.empty()) return image_bytes;
  if (image_path.empty()) throw InvalidInput("sample " + sample_id + " has no image");
  std::filesystem::path p(image_path);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return read_file(p);
}

RgbImage SampleRecord::load(const std::filesystem::path& base_dir) const {
  return decode_image(load_bytes(base_dir));
}

nlohmann::json SampleRecord::to_json() const {
  nlohmann::json j{{"sample_id", sample_id}, {"image", image_path}, {"source", source}};
  j["label"] = label ? nlohmann::json(*label) : nlohmann::json(nullptr);
  j["date"] = date ? nlohmann::json(*date) : nlohmann::json(nullptr);
  j["meta"] = meta;
  return j;
}

SampleRecord SampleRecord::from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  validate_sample_id(r.sample_id);
  r.image_path = j.value("image", "");
  if (j.contains("label") && !j["label"].is_null()) {
    const int label = j["label"].get<int>();
    if (label != 0 && label != 1) throw InvalidInput("label must be 0 or 1 for " + r.sample_id);
    r.label = label;
  }
  r.source = j.value("source", "");
  if (j.contains("date") && !j["date"].is_null()) r.date = j["date"].get<std::string>();
  if (j.contains("meta") && j["meta"].is_object())
    for (const auto& [k, v] : j["meta"].items()) r.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return r;
}

void validate_sample_id(const std::string& id) {
  const bool ok = !id.empty() && id != "." && id != ".." &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
                  });
  if (!ok) throw InvalidInput("invalid sample_id '" + id + "' (allowed: letters, digits, . _ -)");
}

}  // namespace kcmp
