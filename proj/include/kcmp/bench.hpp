#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcmp/raster.hpp"
#include "kcmp/sample.hpp"

namespace kcmp {

enum class Construction { iid_split, cutoff_date, external };
std::string_view construction_name(Construction c);
Construction parse_construction(std::string_view name);

struct BenchmarkManifest {
  std::string name;
  std::vector<SampleRecord> records;
  Construction construction = Construction::external;
  std::uint64_t seed = 0;
  std::optional<std::string> cutoff;
  std::string notes;

  /// Balanced labels for iid splits, no content hash shared across classes,
  /// unique sample ids.
  void validate() const;
};

/// First line `{"header":{...}}`, then one SampleRecord per line.
std::string manifest_to_jsonl(const BenchmarkManifest& manifest);
BenchmarkManifest parse_manifest(std::string_view jsonl);
/// Relative image paths are resolved against the manifest's directory.
BenchmarkManifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const BenchmarkManifest& manifest);

/// A pool is either a manifest file or a directory of .png/.jpg/.jpeg files
/// (sorted by name; the file stem is the sample id).
std::vector<SampleRecord> load_pool(const std::filesystem::path& path);

/// Draws `n_per_class` from each pool without replacement. Content hashes
/// shared between the pools are rejected.
BenchmarkManifest build_iid_manifest(const std::vector<SampleRecord>& member_pool,
                                     const std::vector<SampleRecord>& nonmember_pool, std::size_t n_per_class,
                                     std::uint64_t seed, const std::filesystem::path& base_dir = {});

struct RejectedRecord {
  std::string sample_id;
  std::string reason;
};
struct CutoffResult {
  BenchmarkManifest manifest;
  std::vector<RejectedRecord> rejected;
};
/// Label 1 iff date < cutoff (ISO YYYY-MM-DD). Records without a valid date
/// are rejected, not guessed.
CutoffResult build_cutoff_manifest(const std::vector<SampleRecord>& records, const std::string& cutoff_date);

enum class CorruptionKind { crop, rotate, compress };
enum class Severity { light, medium, severe };
CorruptionKind parse_corruption_kind(std::string_view name);
Severity parse_severity(std::string_view name);

/// crop keeps a centered window with {90,75,50}% of the area; rotate turns by
/// {5,15,45} degrees about the center with black fill; compress re-encodes as
/// JPEG at quality {80,50,20}.
RgbImage corrupt_image(const RgbImage& image, CorruptionKind kind, Severity severity);
/// Nearest-neighbour rotation; 0 degrees returns an exact copy.
RgbImage rotate_image(const RgbImage& image, double degrees);

struct PriceRow {
  std::string model_name;
  double image_price_per_image = 0.0;
  double text_price_per_1m_tokens = 0.0;
  double query_price_per_probe = 0.0;
};
struct PriceTable {
  std::vector<PriceRow> rows;
  const PriceRow& find(std::string_view model_name) const;
};
/// `[[model]]` tables with name, image_price, text_price_per_1m, query_price_per_probe.
PriceTable parse_price_table(std::string_view toml);
PriceTable read_price_table(const std::filesystem::path& file);
/// Rows shipped in data/price_table.toml.
PriceTable default_price_table();

struct CostEstimate {
  std::uint64_t queries_per_image = 0;
  std::uint64_t total_queries = 0;
  double total_cost = 0.0;
};
CostEstimate cost_estimate(double avg_probes_per_image, int repeats, std::uint64_t n_images, const PriceRow& price);

}  // namespace kcmp
