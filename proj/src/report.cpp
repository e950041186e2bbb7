#include "kcmp/report.hpp"

#include <sstream>

#include "kcmp/attack.hpp"
#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/roc_export.hpp"

namespace kcmp {

using nlohmann::json;

json build_report(const ReportInputs& inputs) {
  json methods = json::array();
  for (const auto& scores : inputs.methods) {
    scores.validate();
    const auto pos = scores.scores_with_label(1);
    const auto neg = scores.scores_with_label(0);
    json row{{"method", scores.method}, {"members", pos.size()}, {"nonmembers", neg.size()}};
    if (pos.empty() || neg.empty()) {
      row["auc"] = nullptr;
      row["set_level"] = json::object();
      methods.push_back(std::move(row));
      continue;
    }
    row["auc"] = auc(pos, neg);
    json by_k = json::object();
    for (int k : inputs.config.set_sizes) {
      const auto key = std::to_string(k);
      if (static_cast<std::size_t>(k) > pos.size() || static_cast<std::size_t>(k) > neg.size()) {
        by_k[key] = nullptr;
        continue;
      }
      auto rng = Rng::derive(inputs.config.attack.seed, "setlevel/" + scores.method + "/" + key);
      const auto r = set_level_eval(scores, k, inputs.config.set_trials, rng);
      by_k[key] = {{"accuracy", r.accuracy}, {"trials", r.trials}, {"ties", r.ties}};
    }
    row["set_level"] = std::move(by_k);
    methods.push_back(std::move(row));
  }
  return json{{"config", inputs.config.to_json()},
              {"inputs", inputs.input_hashes},
              {"set_sizes", inputs.config.set_sizes},
              {"methods", std::move(methods)}};
}

void write_report(const std::filesystem::path& dir, const ReportInputs& inputs) {
  std::filesystem::create_directories(dir);
  const auto report = build_report(inputs);
  write_file_atomic(dir / "report.json", report.dump(2) + "\n");
  for (const auto& scores : inputs.methods) {
    if (scores.scores_with_label(1).empty() || scores.scores_with_label(0).empty()) continue;
    const auto curve = roc_curve(scores);
    validate_sample_id(scores.method);
    write_file_atomic(dir / ("roc_" + scores.method + ".csv"), roc_to_csv(curve));
    write_file_atomic(dir / ("roc_" + scores.method + ".svg"), roc_to_svg(curve, scores.method));
  }
}

std::map<std::string, std::string> hash_inputs(const std::vector<std::filesystem::path>& files) {
  std::map<std::string, std::string> out;
  for (const auto& f : files) out[f.string()] = sha256_hex(read_file(f));
  return out;
}

ScoreSet read_score_set(const std::filesystem::path& file) {
  ScoreSet set;
  std::istringstream in(read_file(file));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      if (set.method.empty()) set.method = j.value("method", "scores");
      ScoreEntry e{j.at("sample_id").get<std::string>(), j.at("score").get<double>(), std::nullopt};
      if (j.contains("label") && !j["label"].is_null()) e.label = j["label"].get<int>();
      set.entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw InvalidInput(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  set.validate();
  return set;
}

std::string score_set_to_jsonl(const ScoreSet& scores) {
  std::string out;
  for (const auto& e : scores.entries) {
    json j{{"sample_id", e.sample_id}, {"method", scores.method}, {"score", e.score}};
    if (e.label) j["label"] = *e.label;
    out += j.dump() + "\n";
  }
  return out;
}

void attach_labels(ScoreSet& scores, const std::map<std::string, int>& labels) {
  for (auto& e : scores.entries) {
    if (e.label) continue;
    const auto it = labels.find(e.sample_id);
    if (it != labels.end()) e.label = it->second;
  }
}

}  // namespace kcmp
