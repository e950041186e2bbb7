#include "kcmp/attack.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/text.hpp"

namespace kcmp {

using nlohmann::json;

// ---- answer parsing --------------------------------------------------------

namespace {

std::string strip_answer_prefix(std::string s) {
  for (std::string_view prefix : {"answer:", "answer is", "the answer is", "option", "the correct option is"}) {
    if (s.rfind(prefix, 0) == 0) {
      s = normalize_text(s.substr(prefix.size()));
    }
  }
  return s;
}

std::string trim_punct(std::string s) {
  auto junk = [](char c) { return c == '.' || c == '!' || c == '"' || c == '\'' || c == '`' || c == ','; };
  while (!s.empty() && junk(s.back())) s.pop_back();
  while (!s.empty() && junk(s.front())) s.erase(0, 1);
  return normalize_text(s);
}

bool contains_phrase(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word(haystack[pos - 1]);
    const auto end = pos + needle.size();
    const bool right_ok = end == haystack.size() || !is_word(haystack[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

}  // namespace

std::optional<std::size_t> match_answer(std::string_view answer, const std::vector<std::string>& candidates) {
  const auto n = candidates.size();
  auto text = strip_answer_prefix(normalize_text(answer));

  // 1. option letter: "b", "b.", "b)", "(b)", "b: ...", "b. plate"
  {
    std::string s = text;
    bool paren = false;
    if (!s.empty() && (s[0] == '(' || s[0] == '[')) {
      s.erase(0, 1);
      paren = true;
    }
    if (!s.empty() && s[0] >= 'a' && s[0] < static_cast<char>('a' + n)) {
      const bool alone = s.size() == 1;
      const bool delimited = s.size() > 1 && (s[1] == '.' || s[1] == ')' || s[1] == ':' || s[1] == ']');
      if (alone || delimited || (paren && s.size() > 1 && s[1] == ')')) return static_cast<std::size_t>(s[0] - 'a');
    }
  }

  // 2. exact normalized text
  const auto bare = trim_punct(text);
  for (std::size_t i = 0; i < n; ++i)
    if (bare == normalize_text(candidates[i])) return i;

  // 3. unique containment
  std::optional<std::size_t> hit;
  for (std::size_t i = 0; i < n; ++i) {
    if (contains_phrase(text, normalize_text(candidates[i]))) {
      if (hit) return std::nullopt;
      hit = i;
    }
  }
  return hit;
}

// ---- per-probe evaluation --------------------------------------------------

ProbeResult evaluate_probe(const Probe& probe, ModelClient& target, int repeats, double temperature) {
  if (repeats < 1) throw InvalidInput("repeat count R must be at least 1");
  if (temperature < 0.0 || temperature > 1.0) throw InvalidInput("temperature must lie in [0, 1]");
  ProbeResult result;
  result.probe_id = probe.probe_id;
  int failures = 0;
  for (int j = 0; j < repeats; ++j) {
    BackendRequest request;
    request.role = Role::target;
    request.instruction = probe.prompt_text;
    request.image_png = probe.artifact_png;
    request.temperature = temperature;
    request.max_tokens = 32;
    request.nonce = static_cast<std::uint32_t>(j);

    AnswerRecord answer;
    std::optional<BackendResponse> response;
    for (int attempt = 0; attempt < 2 && !response; ++attempt) {
      try {
        response = target.query(request);
      } catch (const BackendError&) {
        if (attempt == 1) answer.failed = true;
      }
    }
    if (response) {
      answer.raw_text = *response->text;
      answer.matched = match_answer(answer.raw_text, probe.candidates);
      answer.correct = answer.matched && *answer.matched == probe.true_index ? 1 : 0;
    } else {
      ++failures;
      result.flagged = true;
    }
    result.answers.push_back(std::move(answer));
  }
  if (failures == repeats) throw ProbeEvaluationError("every repeat failed for probe " + probe.probe_id);
  int correct = 0;
  for (const auto& a : result.answers) correct += a.correct;
  result.accuracy = static_cast<double>(correct) / repeats;
  return result;
}

DetectionScore detection_score(const std::string& sample_id, std::span<const ProbeResult> results) {
  if (results.empty()) throw InvalidInput("sample " + sample_id + " has no evaluated probes");
  double sum = 0.0;
  for (const auto& r : results) sum += r.accuracy;
  return {sample_id, sum / static_cast<double>(results.size()), results.size()};
}

// ---- set-level -------------------------------------------------------------

SetLevelResult set_level_eval(const ScoreSet& scores, int set_size, int trials, Rng& rng, bool keep_details) {
  if (set_size < 1) throw InvalidInput("set size must be at least 1");
  if (trials < 1) throw InvalidInput("set-level evaluation needs at least one trial");
  scores.validate();
  std::vector<const ScoreEntry*> members;
  std::vector<const ScoreEntry*> nonmembers;
  for (const auto& e : scores.entries) {
    if (!e.label) continue;
    (*e.label == 1 ? members : nonmembers).push_back(&e);
  }
  const auto k = static_cast<std::size_t>(set_size);
  if (members.size() < k || nonmembers.size() < k)
    throw InvalidInput("set-level evaluation with K=" + std::to_string(set_size) + " needs at least K samples per class (" +
                       std::to_string(members.size()) + " members, " + std::to_string(nonmembers.size()) +
                       " non-members)");

  SetLevelResult result;
  result.set_size = set_size;
  result.trials = trials;
  int correct = 0;
  for (int t = 0; t < trials; ++t) {
    SetLevelTrial trial;
    double sum_m = 0.0;
    for (auto i : sample_without_replacement(members.size(), k, rng)) {
      sum_m += members[i]->score;
      if (keep_details) trial.member_set.push_back(members[i]->sample_id);
    }
    double sum_n = 0.0;
    for (auto i : sample_without_replacement(nonmembers.size(), k, rng)) {
      sum_n += nonmembers[i]->score;
      if (keep_details) trial.nonmember_set.push_back(nonmembers[i]->sample_id);
    }
    trial.aggregate_member = sum_m / set_size;
    trial.aggregate_nonmember = sum_n / set_size;
    if (trial.aggregate_member == trial.aggregate_nonmember) {
      trial.tie = true;
      ++result.ties;
      trial.correct = rng.bernoulli(0.5) ? 1 : 0;
    } else {
      trial.correct = trial.aggregate_member > trial.aggregate_nonmember ? 1 : 0;
    }
    correct += trial.correct;
    if (keep_details) result.details.push_back(std::move(trial));
  }
  result.accuracy = static_cast<double>(correct) / trials;
  return result;
}

// ---- orchestration ---------------------------------------------------------

namespace {

std::vector<const Probe*> selected_probes(const SampleInputs& sample) {
  std::vector<const Probe*> out;
  if (sample.calibration.empty()) {
    for (const auto& p : sample.probes) out.push_back(&p);
    return out;
  }
  std::unordered_map<std::string, const Probe*> by_id;
  for (const auto& p : sample.probes) by_id.emplace(p.probe_id, &p);
  for (const auto& rec : sample.calibration) {
    if (!rec.selected) continue;
    auto it = by_id.find(rec.probe_id);
    if (it == by_id.end()) throw InvalidInput("calibration refers to unknown probe " + rec.probe_id);
    out.push_back(it->second);
  }
  return out;
}

struct JournalEntry {
  double score;
  std::size_t n_probes;
};

std::map<std::string, JournalEntry> load_journal(const std::filesystem::path& path) {
  std::map<std::string, JournalEntry> done;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      done[j.at("sample_id").get<std::string>()] = {j.at("score").get<double>(), j.at("n_probes").get<std::size_t>()};
    } catch (const json::exception&) {
      // A torn last line from an interrupted write; the sample is re-run.
    }
  }
  return done;
}

enum class SampleStatus { pending, scored, unscored, failed };

struct SampleOutcome {
  SampleStatus status = SampleStatus::pending;
  DetectionScore score;
  std::string stage;
  std::string error;
  bool flagged = false;
};

}  // namespace

AttackOutcome run_attack(std::span<const SampleInputs> samples, ModelClient& target, const AttackConfig& config,
                         const std::optional<std::filesystem::path>& journal) {
  std::map<std::string, JournalEntry> done;
  std::ofstream journal_out;
  std::mutex journal_mutex;
  if (journal) {
    if (journal->has_parent_path()) std::filesystem::create_directories(journal->parent_path());
    done = load_journal(*journal);
    journal_out.open(*journal, std::ios::app);
  }

  std::vector<SampleOutcome> outcomes(samples.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) {
      const auto& sample = samples[i];
      auto& out = outcomes[i];
      if (auto it = done.find(sample.sample_id); it != done.end()) {
        out.status = SampleStatus::scored;
        out.score = {sample.sample_id, it->second.score, it->second.n_probes};
        continue;
      }
      try {
        const auto probes = selected_probes(sample);
        if (probes.empty()) {
          out.status = SampleStatus::unscored;
          continue;
        }
        std::vector<ProbeResult> results;
        for (const auto* p : probes) {
          results.push_back(evaluate_probe(*p, target, config.repeats, config.temperature));
          out.flagged = out.flagged || results.back().flagged;
        }
        out.score = detection_score(sample.sample_id, results);
        out.status = SampleStatus::scored;
        if (out.flagged) {
          out.stage = "attack";
          out.error = "one or more repeats failed and were counted incorrect";
        } else if (journal) {
          std::lock_guard lock(journal_mutex);
          journal_out << json{{"sample_id", sample.sample_id}, {"score", out.score.score}, {"n_probes", out.score.n_probes}}
                             .dump()
                      << std::endl;
        }
      } catch (const Error& e) {
        out.status = SampleStatus::failed;
        out.stage = "attack";
        out.error = e.what();
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(config.concurrency, static_cast<int>(samples.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }

  AttackOutcome outcome;
  outcome.scores.method = "kcmp";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& o = outcomes[i];
    switch (o.status) {
      case SampleStatus::scored:
        outcome.scores.entries.push_back({o.score.sample_id, o.score.score, samples[i].label});
        outcome.details.push_back(o.score);
        if (o.flagged) outcome.failures.push_back({samples[i].sample_id, o.stage, o.error});
        break;
      case SampleStatus::unscored:
        ++outcome.unscored;
        break;
      case SampleStatus::failed:
        outcome.failures.push_back({samples[i].sample_id, o.stage, o.error});
        break;
      case SampleStatus::pending:
        break;
    }
  }
  return outcome;
}

std::vector<SweepPoint> temperature_sweep(std::span<const SampleInputs> samples, ModelClient& target,
                                          std::span<const double> temperatures, const AttackConfig& config) {
  std::vector<SweepPoint> table;
  for (double t : temperatures) {
    if (t < 0.0 || t > 1.0) throw InvalidInput("sweep temperatures must lie in [0, 1]");
    auto cfg = config;
    cfg.temperature = t;
    const auto outcome = run_attack(samples, target, cfg);
    const auto pos = outcome.scores.scores_with_label(1);
    const auto neg = outcome.scores.scores_with_label(0);
    table.push_back({t, auc(pos, neg), outcome.scores.entries.size()});
  }
  return table;
}

std::string scores_to_jsonl(std::span<const DetectionScore> scores, std::string_view method) {
  std::string out;
  for (const auto& s : scores)
    out += json{{"sample_id", s.sample_id}, {"method", method}, {"score", s.score}, {"n_probes", s.n_probes}}.dump() +
           "\n";
  return out;
}

std::string failures_to_jsonl(std::span<const FailureRecord> failures) {
  std::string out;
  for (const auto& f : failures)
    out += json{{"sample_id", f.sample_id}, {"stage", f.stage}, {"error", f.error}}.dump() + "\n";
  return out;
}

}  // namespace kcmp
