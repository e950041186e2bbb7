#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kcmp/backends.hpp"
#include "kcmp/calibration.hpp"
#include "kcmp/probes.hpp"
#include "kcmp/rng.hpp"
#include "kcmp/stats.hpp"

namespace kcmp {

struct AnswerRecord {
  std::string raw_text;
  std::optional<std::size_t> matched;
  int correct = 0;
  bool failed = false;  // backend failed twice; counted as incorrect
};

struct ProbeResult {
  std::string probe_id;
  std::vector<AnswerRecord> answers;  // exactly R entries
  double accuracy = 0.0;              // mean of correct flags
  bool flagged = false;               // at least one repeat failed
};

struct DetectionScore {
  std::string sample_id;
  double score = 0.0;  // mean probe accuracy
  std::size_t n_probes = 0;
};

/// Maps a free-text answer to a candidate index: option letter ("B", "(b)",
/// "B. plate"), then normalized exact text, then the unique candidate whose
/// text appears as a whole phrase in the answer. No match yields nullopt.
std::optional<std::size_t> match_answer(std::string_view answer, const std::vector<std::string>& candidates);

/// Queries the target `repeats` times (nonce = repeat index) with the probe's
/// prompt and artifact. Candidate order is the stored one for every repeat.
ProbeResult evaluate_probe(const Probe& probe, ModelClient& target, int repeats, double temperature);

/// Mean of probe accuracies. Throws InvalidInput when `results` is empty.
DetectionScore detection_score(const std::string& sample_id, std::span<const ProbeResult> results);

struct SetLevelTrial {
  std::vector<std::string> member_set;
  std::vector<std::string> nonmember_set;
  double aggregate_member = 0.0;
  double aggregate_nonmember = 0.0;
  bool tie = false;
  int correct = 0;
};

struct SetLevelResult {
  int set_size = 0;
  double accuracy = 0.0;
  int trials = 0;
  int ties = 0;  // resolved by a seeded coin flip
  std::vector<SetLevelTrial> details;  // filled only when requested
};

/// Each trial draws `set_size` members and `set_size` non-members without
/// replacement, compares mean scores, and counts the member set winning.
SetLevelResult set_level_eval(const ScoreSet& scores, int set_size, int trials, Rng& rng,
                              bool keep_details = false);

struct AttackConfig {
  int num_alternatives = 3;  // K
  std::size_t top_n = 5;     // N, kSelectAll disables the filter
  int repeats = 4;           // R
  double temperature = 0.3;
  std::uint64_t seed = 0;
  int concurrency = 4;
  int rationality_trials = 4;
};

struct SampleInputs {
  std::string sample_id;
  std::optional<int> label;
  std::vector<Probe> probes;
  std::vector<CalibrationRecord> calibration;  // empty: every probe is used
};

struct FailureRecord {
  std::string sample_id;
  std::string stage;
  std::string error;
};

struct AttackOutcome {
  ScoreSet scores;                         // method "kcmp", input order
  std::vector<DetectionScore> details;     // same order as scores.entries
  std::vector<FailureRecord> failures;
  std::size_t unscored = 0;                // samples with no selected probe
  bool complete() const { return failures.empty(); }
};

/// Evaluates the selected probes of every sample on a bounded worker pool.
/// When `journal` is given, fully evaluated samples are appended to it and
/// skipped on the next run; samples with failed repeats are never journaled.
AttackOutcome run_attack(std::span<const SampleInputs> samples, ModelClient& target, const AttackConfig& config,
                         const std::optional<std::filesystem::path>& journal = std::nullopt);

struct SweepPoint {
  double temperature = 0.0;
  double auc = 0.0;
  std::size_t scored = 0;
};

/// One attack per temperature over the same probes and calibration.
std::vector<SweepPoint> temperature_sweep(std::span<const SampleInputs> samples, ModelClient& target,
                                          std::span<const double> temperatures, const AttackConfig& config);

/// `{sample_id, method:"kcmp", score, n_probes}` per line.
std::string scores_to_jsonl(std::span<const DetectionScore> scores, std::string_view method = "kcmp");
std::string failures_to_jsonl(std::span<const FailureRecord> failures);

}  // namespace kcmp
