#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcmp/config.hpp"
#include "kcmp/stats.hpp"

namespace kcmp {

struct ReportInputs {
  RunConfig config;
  std::map<std::string, std::string> input_hashes;  // file name -> sha256
  std::vector<ScoreSet> methods;
};

/// Methods x set-size matrix with AUC and set-level accuracy, plus the run
/// configuration and input hashes. Contains no timestamps.
nlohmann::json build_report(const ReportInputs& inputs);

/// report.json plus roc_<method>.csv and roc_<method>.svg in `dir`.
void write_report(const std::filesystem::path& dir, const ReportInputs& inputs);

/// sha256 of every file, keyed by its path as given.
std::map<std::string, std::string> hash_inputs(const std::vector<std::filesystem::path>& files);

/// JSONL score lines `{sample_id, method, score, label?}`; method taken from
/// the first line unless overridden.
ScoreSet read_score_set(const std::filesystem::path& file);
std::string score_set_to_jsonl(const ScoreSet& scores);
/// Attaches labels from `labels` (sample id -> label) to unlabeled entries.
void attach_labels(ScoreSet& scores, const std::map<std::string, int>& labels);

}  // namespace kcmp
