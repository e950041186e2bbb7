#include "kcmp/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <regex>
#include <map>
#include <set>
#include <sstream>

#include "kcmp/config.hpp"
#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/rng.hpp"

namespace kcmp {

using nlohmann::json;

std::string_view construction_name(Construction c) {
  switch (c) {
    case Construction::iid_split: return "iid_split";
    case Construction::cutoff_date: return "cutoff_date";
    case Construction::external: return "external";
  }
  return "external";
}

Construction parse_construction(std::string_view name) {
  if (name == "iid_split") return Construction::iid_split;
  if (name == "cutoff_date") return Construction::cutoff_date;
  if (name == "external") return Construction::external;
  throw InvalidInput("unknown manifest construction '" + std::string(name) + "'");
}

namespace {

std::string content_hash(const SampleRecord& r, const std::filesystem::path& base_dir) {
  return sha256_hex(r.load_bytes(base_dir));
}

bool valid_iso_date(const std::string& d) {
  static const std::regex pattern(R"(\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01]))");
  return std::regex_match(d, pattern);
}

}  // namespace

void BenchmarkManifest::validate() const {
  std::set<std::string> ids;
  std::size_t members = 0, nonmembers = 0;
  for (const auto& r : records) {
    validate_sample_id(r.sample_id);
    if (!ids.insert(r.sample_id).second) throw InvalidInput("duplicate sample_id " + r.sample_id);
    if (r.label == 1) ++members;
    if (r.label == 0) ++nonmembers;
  }
  if (construction == Construction::iid_split && members != nonmembers)
    throw InvalidInput("iid manifest is unbalanced: " + std::to_string(members) + " members vs " +
                       std::to_string(nonmembers) + " non-members");
}

std::string manifest_to_jsonl(const BenchmarkManifest& m) {
  json header{{"name", m.name},
              {"construction", construction_name(m.construction)},
              {"seed", m.seed},
              {"cutoff", m.cutoff ? json(*m.cutoff) : json(nullptr)},
              {"notes", m.notes},
              {"count", m.records.size()}};
  std::string out = json{{"header", header}}.dump() + "\n";
  for (const auto& r : m.records) out += r.to_json().dump() + "\n";
  return out;
}

BenchmarkManifest parse_manifest(std::string_view jsonl) {
  BenchmarkManifest m;
  std::istringstream in{std::string(jsonl)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw InvalidInput("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.contains("header")) {
      const auto& h = j["header"];
      m.name = h.value("name", "");
      m.construction = parse_construction(h.value("construction", "external"));
      m.seed = h.value("seed", std::uint64_t{0});
      if (h.contains("cutoff") && !h["cutoff"].is_null()) m.cutoff = h["cutoff"].get<std::string>();
      m.notes = h.value("notes", "");
      continue;
    }
    try {
      m.records.push_back(SampleRecord::from_json(j));
    } catch (const json::exception& e) {
      throw InvalidInput("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  m.validate();
  return m;
}

BenchmarkManifest read_manifest(const std::filesystem::path& file) {
  auto m = parse_manifest(read_file(file));
  const auto dir = file.parent_path();
  for (auto& r : m.records) {
    std::filesystem::path p(r.image_path);
    if (!r.image_path.empty() && p.is_relative() && !dir.empty()) r.image_path = (dir / p).string();
  }
  return m;
}

void write_manifest(const std::filesystem::path& file, const BenchmarkManifest& manifest) {
  manifest.validate();
  write_file_atomic(file, manifest_to_jsonl(manifest));
}

std::vector<SampleRecord> load_pool(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InvalidInput("pool not found: " + path.string());
  if (!std::filesystem::is_directory(path)) return read_manifest(path).records;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(path)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SampleRecord> pool;
  for (const auto& f : files) {
    SampleRecord r;
    r.sample_id = f.stem().string();
    validate_sample_id(r.sample_id);
    r.image_path = f.string();
    r.source = path.filename().string();
    pool.push_back(std::move(r));
  }
  return pool;
}

BenchmarkManifest build_iid_manifest(const std::vector<SampleRecord>& member_pool,
                                     const std::vector<SampleRecord>& nonmember_pool, std::size_t n_per_class,
                                     std::uint64_t seed, const std::filesystem::path& base_dir) {
  if (member_pool.size() < n_per_class || nonmember_pool.size() < n_per_class)
    throw InvalidInput("pool too small: need " + std::to_string(n_per_class) + " per class, have " +
                       std::to_string(member_pool.size()) + " members and " + std::to_string(nonmember_pool.size()) +
                       " non-members");

  std::map<std::string, std::string> member_hashes;
  for (const auto& r : member_pool) member_hashes.emplace(content_hash(r, base_dir), r.sample_id);
  for (const auto& r : nonmember_pool) {
    const auto it = member_hashes.find(content_hash(r, base_dir));
    if (it != member_hashes.end())
      throw InvalidInput("pools overlap: " + r.sample_id + " has the same content as member " + it->second);
  }

  BenchmarkManifest m;
  m.name = "iid";
  m.construction = Construction::iid_split;
  m.seed = seed;
  auto draw = [&](const std::vector<SampleRecord>& pool, std::string_view stream, int label) {
    auto rng = Rng::derive(seed, stream);
    auto idx = sample_without_replacement(pool.size(), n_per_class, rng);
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) {
      auto r = pool[i];
      r.label = label;
      m.records.push_back(std::move(r));
    }
  };
  draw(member_pool, "iid/members", 1);
  draw(nonmember_pool, "iid/nonmembers", 0);
  m.validate();
  return m;
}

CutoffResult build_cutoff_manifest(const std::vector<SampleRecord>& records, const std::string& cutoff_date) {
  if (!valid_iso_date(cutoff_date)) throw InvalidInput("cutoff must be YYYY-MM-DD, got '" + cutoff_date + "'");
  CutoffResult result;
  result.manifest.name = "cutoff-" + cutoff_date;
  result.manifest.construction = Construction::cutoff_date;
  result.manifest.cutoff = cutoff_date;
  for (const auto& r : records) {
    if (!r.date) {
      result.rejected.push_back({r.sample_id, "missing date"});
      continue;
    }
    if (!valid_iso_date(*r.date)) {
      result.rejected.push_back({r.sample_id, "malformed date '" + *r.date + "'"});
      continue;
    }
    auto labeled = r;
    // ISO dates order lexicographically; the cutoff day itself is a non-member.
    labeled.label = *r.date < cutoff_date ? 1 : 0;
    result.manifest.records.push_back(std::move(labeled));
  }
  result.manifest.validate();
  return result;
}

CorruptionKind parse_corruption_kind(std::string_view name) {
  if (name == "crop") return CorruptionKind::crop;
  if (name == "rotate") return CorruptionKind::rotate;
  if (name == "compress") return CorruptionKind::compress;
  throw InvalidInput("unknown corruption kind '" + std::string(name) + "'");
}

Severity parse_severity(std::string_view name) {
  if (name == "light") return Severity::light;
  if (name == "medium") return Severity::medium;
  if (name == "severe") return Severity::severe;
  throw InvalidInput("unknown severity '" + std::string(name) + "'");
}

RgbImage rotate_image(const RgbImage& image, double degrees) {
  if (degrees == 0.0) return image;
  RgbImage out(image.width(), image.height(), kBlack);
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (image.width() - 1) / 2.0, cy = (image.height() - 1) / 2.0;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      // inverse map
      const double dx = x - cx, dy = y - cy;
      const auto sx = static_cast<int>(std::lround(c * dx + s * dy + cx));
      const auto sy = static_cast<int>(std::lround(-s * dx + c * dy + cy));
      if (sx >= 0 && sy >= 0 && sx < image.width() && sy < image.height()) out.set(x, y, image.at(sx, sy));
    }
  }
  return out;
}

RgbImage corrupt_image(const RgbImage& image, CorruptionKind kind, Severity severity) {
  if (image.empty()) throw InvalidInput("cannot corrupt an empty image");
  const auto level = static_cast<int>(severity);
  switch (kind) {
    case CorruptionKind::crop: {
      constexpr double kArea[] = {0.90, 0.75, 0.50};
      const double side = std::sqrt(kArea[level]);
      const int w = std::max(1, static_cast<int>(std::lround(image.width() * side)));
      const int h = std::max(1, static_cast<int>(std::lround(image.height() * side)));
      return crop(image, {(image.width() - w) / 2, (image.height() - h) / 2, w, h});
    }
    case CorruptionKind::rotate: {
      constexpr double kDegrees[] = {5.0, 15.0, 45.0};
      return rotate_image(image, kDegrees[level]);
    }
    case CorruptionKind::compress: {
      constexpr int kQuality[] = {80, 50, 20};
      return decode_jpeg(encode_jpeg(image, kQuality[level]));
    }
  }
  throw InvalidInput("unknown corruption kind");
}

const PriceRow& PriceTable::find(std::string_view model_name) const {
  for (const auto& r : rows)
    if (r.model_name == model_name) return r;
  std::string known;
  for (const auto& r : rows) known += (known.empty() ? "" : ", ") + r.model_name;
  throw InvalidInput("no price row for '" + std::string(model_name) + "' (known: " + known + ")");
}

PriceTable parse_price_table(std::string_view toml) {
  const auto doc = parse_toml(toml);
  if (!doc.contains("model") || !doc["model"].is_array()) throw InvalidInput("price table has no [[model]] rows");
  PriceTable table;
  for (const auto& m : doc["model"]) {
    PriceRow row;
    try {
      row.model_name = m.at("name").get<std::string>();
      row.image_price_per_image = m.value("image_price", 0.0);
      row.text_price_per_1m_tokens = m.value("text_price_per_1m", 0.0);
      row.query_price_per_probe = m.at("query_price_per_probe").get<double>();
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("price table row: ") + e.what());
    }
    if (row.image_price_per_image < 0 || row.text_price_per_1m_tokens < 0 || row.query_price_per_probe < 0)
      throw InvalidInput("negative price for " + row.model_name);
    table.rows.push_back(std::move(row));
  }
  return table;
}

PriceTable read_price_table(const std::filesystem::path& file) { return parse_price_table(read_file(file)); }

PriceTable default_price_table() {
  return PriceTable{{{"GPT-4o", 0.000638, 2.5, 0.00079},
                     {"Gemini-2.5", 0.001315, 1.25, 0.00139},
                     {"Claude-3.7", 0.00042, 3.0, 0.00060}}};
}

CostEstimate cost_estimate(double avg_probes_per_image, int repeats, std::uint64_t n_images, const PriceRow& price) {
  if (!(avg_probes_per_image >= 0.0) || repeats < 0) throw InvalidInput("cost inputs must be non-negative");
  CostEstimate e;
  // epsilon: products meant to be integral can land a hair above it
  e.queries_per_image =
      static_cast<std::uint64_t>(std::ceil(avg_probes_per_image * static_cast<double>(repeats) - 1e-9));
  e.total_queries = e.queries_per_image * n_images;
  e.total_cost = static_cast<double>(e.total_queries) * price.query_price_per_probe;
  return e;
}

}  // namespace kcmp
