#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcmp/backends.hpp"
#include "kcmp/raster.hpp"
#include "kcmp/rng.hpp"
#include "kcmp/sample.hpp"

namespace kcmp {

/// One segmented object of a sample image.
struct ObjectRegion {
  std::string object_id;
  Bitmap mask;
  BoundingBox bbox;  // tight box of `mask`
  std::optional<std::string> label_text;
  RgbImage crop;  // bbox crop with pixels outside the mask set to black
};

enum class ProbeKind { shape, color };
std::string_view probe_kind_name(ProbeKind kind);
ProbeKind parse_probe_kind(std::string_view name);

/// A multiple-choice mask prediction task. `true_index` never leaves the
/// local machine; only prompt_text and the artifact are sent to a target.
struct Probe {
  std::string probe_id;
  std::string sample_id;
  std::string object_id;
  ProbeKind kind = ProbeKind::shape;
  int order = 0;             // construction order within the sample
  std::string artifact_png;  // masked image (shape) or grayscale-with-box image (color)
  std::string crop_png;      // object crop, used for relevance scoring
  std::vector<std::string> candidates;
  std::size_t true_index = 0;
  std::string prompt_text;

  const std::string& true_answer() const { return candidates.at(true_index); }
  /// Every candidate except the true one, in presentation order.
  std::vector<std::string> alternatives() const;
};

struct ProbeOptions {
  int num_alternatives = 3;  // K; K + 1 options per probe
  int refill_retries = 3;
  Rgb box_color = kRed;
  int box_width = 3;
  double generator_temperature = 0.7;
};

// Instructions sent to the helper models. The simulator dispatches on these
// leading phrases, so keep them stable.
namespace prompts {
inline constexpr std::string_view kLabelObject =
    "Name the object shown in this image patch. Reply with a short noun phrase only.";
inline constexpr std::string_view kAlternativesPrefix =
    "Based on the surrounding context around the mask shown in the image, generate the names of ";
inline constexpr std::string_view kObservedColorsPrefix = "Identify the primary colors of the object";
inline constexpr std::string_view kUnobservedColorsPrefix = "List plausible but unobserved colors";
inline constexpr std::string_view kObjectProbeHeader =
    "You have seen the image in your training data. Choose the option that correctly identifies "
    "the original content of the masked area.";
inline constexpr std::string_view kColorProbeHeader =
    "The image is in grayscale, but you have encountered it during training. Identify the original "
    "color of the object enclosed in the red box.";

std::string alternatives_instruction(int count);
std::string observed_colors_instruction();
std::string unobserved_colors_instruction(int count);
/// Header, lettered option list ("A. cup"), trailing "Answer:".
std::string probe_prompt(ProbeKind kind, const std::vector<std::string>& candidates);
}  // namespace prompts

/// Queries the segmenter and returns regions sorted by mask area, largest first.
std::vector<ObjectRegion> segment_objects(const SampleRecord& sample, const RgbImage& image,
                                          ModelClient& segmenter);

/// Region built directly from a mask (bbox and crop derived).
ObjectRegion make_region(std::string object_id, const RgbImage& image, Bitmap mask,
                         std::optional<std::string> label = std::nullopt);

/// Pixels under the mask set to black; everything else untouched.
RgbImage mask_object(const RgbImage& image, const ObjectRegion& region);

/// ITU-R BT.601 luma, rounded to nearest: 0.299 R + 0.587 G + 0.114 B.
std::uint8_t luma601(Rgb c);

/// Grayscale copy with a `box_width`-pixel stroke drawn inside the region's bbox.
RgbImage grayscale_with_box(const RgbImage& image, const ObjectRegion& region, Rgb box_color = kRed,
                            int box_width = 3);

Probe build_shape_probe(const SampleRecord& sample, const RgbImage& image, const ObjectRegion& region,
                        ModelClient& generator, const ProbeOptions& options, Rng& rng);

Probe build_color_probe(const SampleRecord& sample, const RgbImage& image, const ObjectRegion& region,
                        ModelClient& generator, const ProbeOptions& options, Rng& rng);

struct ProbeFailure {
  std::string object_id;
  std::string kind;
  std::string reason;
};

struct ProbeSet {
  std::string sample_id;
  std::vector<Probe> probes;
  std::vector<ProbeFailure> failures;
  std::size_t region_count = 0;
};

/// Segments the image and builds a shape and a color probe per region.
/// Each probe draws from its own stream derived from (seed, probe id), so the
/// result does not depend on construction order or concurrency.
ProbeSet build_probe_set(const SampleRecord& sample, const RgbImage& image, const Backends& backends,
                         const ProbeOptions& options, std::uint64_t seed);

/// `{dir}/{sample_id}.json` plus one PNG per artifact and crop next to it.
std::filesystem::path write_probe_set(const std::filesystem::path& dir, const ProbeSet& set);
ProbeSet read_probe_set(const std::filesystem::path& file);

}  // namespace kcmp
