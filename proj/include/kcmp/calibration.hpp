#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kcmp/backends.hpp"
#include "kcmp/probes.hpp"

namespace kcmp {

struct RationalityScore {
  std::string alternative;
  double r = 0.0;  // affirmative / trials
  int trials = 0;  // trials that produced a parseable judgment
};

struct CalibrationRecord {
  std::string probe_id;
  int order = 0;  // construction order within the sample, breaks filter ties
  double relevance_u = 0.0;
  std::vector<RationalityScore> rationality;
  double filter_f = 0.0;
  bool selected = false;
};

struct CaptionRecord {
  std::string sample_id;
  std::string caption;
  std::map<std::string, std::string> masked_descriptions;  // probe_id -> text
};

/// Selecting with this N keeps every probe (the "no filter" arm).
inline constexpr std::size_t kSelectAll = std::numeric_limits<std::size_t>::max();

struct CalibrationOptions {
  std::size_t top_n = 5;
  int rationality_trials = 4;
  double reasoner_temperature = 0.7;
};

namespace prompts {
inline constexpr std::string_view kCaptionImage =
    "Describe this image in one or two sentences, naming its main objects and their colors.";
inline constexpr std::string_view kDescribeMasked =
    "Describe this image in one or two sentences. Mention where the blacked-out or boxed region is and "
    "what surrounds it, without guessing what it contains.";
inline constexpr std::string_view kRationalityPrefix = "Read the scene description below.";
std::string rationality_instruction(const std::string& masked_description, const std::string& alternative);
inline constexpr std::string_view kRationalityReprompt = "\nReply with exactly one word: yes or no.";
}  // namespace prompts

/// Caption of an image (original or probe artifact). Empty replies are errors.
std::string caption_image(const std::string& image_png, ModelClient& captioner,
                          std::string_view instruction = prompts::kCaptionImage);

/// Cosine similarity between two embedding vectors, in [-1, 1].
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Relevance u: cosine between the embedding of `caption` and of the object crop.
double clip_relevance(const std::string& caption, const std::string& crop_png, ModelClient& embedder);

/// Strict yes/no parse: lowercase, trim, strip trailing punctuation and quotes.
std::optional<bool> parse_yes_no(std::string_view reply);

/// Fraction of `trials` text-only judgments saying the alternative plausibly
/// fills the described masked region. Unparseable replies get one reprompt;
/// still-unparseable trials are dropped.
RationalityScore rationality(const std::string& masked_description, const std::string& alternative,
                             ModelClient& reasoner, int trials, double temperature = 0.7);

/// Mean of [u, r_1, ..., r_K].
double filter_score(double u, std::span<const double> rs);

/// Sorts by filter_f descending (ties: lower `order` first) and marks the first
/// min(n, size) records selected.
std::vector<CalibrationRecord> select_top_n(std::vector<CalibrationRecord> records, std::size_t n);

struct CalibrationResult {
  CaptionRecord captions;
  std::vector<CalibrationRecord> records;  // in selection order
  std::vector<std::pair<std::string, std::string>> excluded;  // probe_id, reason
};

/// Calibrates every probe of one sample and applies top-N selection.
CalibrationResult calibrate_probe_set(const ProbeSet& set, const std::string& sample_image_png,
                                      const Backends& backends, const CalibrationOptions& options);

/// JSONL, one record per probe: {probe_id, order, u, r:[...], alternatives, trials, f, selected}.
void write_calibration(const std::filesystem::path& file, const CalibrationResult& result);
std::vector<CalibrationRecord> read_calibration(const std::filesystem::path& file);

}  // namespace kcmp
