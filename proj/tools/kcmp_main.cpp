// kcmp command-line tool.
// Exit codes: 0 ok, 1 usage, 2 invalid input, 3 backend failure, 4 partial results.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kcmp/attack.hpp"
#include "kcmp/baselines.hpp"
#include "kcmp/bench.hpp"
#include "kcmp/calibration.hpp"
#include "kcmp/config.hpp"
#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/http_backend.hpp"
#include "kcmp/parallel.hpp"
#include "kcmp/probes.hpp"
#include "kcmp/raster.hpp"
#include "kcmp/report.hpp"
#include "kcmp/simulation.hpp"
#include "kcmp/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kcmp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitBackend = 3;
constexpr int kExitPartial = 4;

struct Globals {
  std::string config_file;
  std::string backend = "http";
  std::string workdir = "kcmp-work";
  std::string cache_dir;
  std::uint64_t seed = 0;
  int concurrency = 4;
  int k = 3;
  std::string n = "5";
  int r = 4;
  double temperature = 0.3;
  // simulator knobs, used with --backend sim
  double sim_pm = 0.7;
  double sim_pn = 0.25;
  std::optional<double> sim_pg;
  double sim_noise_slope = 0.0;
};

// Flags first, then the config file on top of them.
RunConfig resolve_config(const Globals& g) {
  RunConfig c;
  c.workdir = g.workdir;
  c.cache_dir = g.cache_dir;
  c.attack.seed = g.seed;
  c.attack.concurrency = g.concurrency;
  c.attack.num_alternatives = g.k;
  c.attack.repeats = g.r;
  c.attack.temperature = g.temperature;
  if (g.n == "all") {
    c.attack.top_n = kSelectAll;
  } else {
    try {
      const auto v = std::stoll(g.n);
      if (v < 1) throw InvalidInput("--n must be >= 1 or \"all\"");
      c.attack.top_n = static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw InvalidInput("--n must be a positive integer or \"all\", got '" + g.n + "'");
    }
  }
  if (!g.config_file.empty()) return load_run_config(g.config_file, c);
  c.validate();
  return c;
}

SimulatorConfig sim_config(const Globals& g, const RunConfig& c) {
  SimulatorConfig s;
  s.p_member = g.sim_pm;
  s.p_nonmember = g.sim_pn;
  s.p_grounded = g.sim_pg;
  s.noise_vs_temperature = g.sim_noise_slope;
  s.seed = c.attack.seed;
  s.validate();
  return s;
}

struct Runtime {
  Backends backends;
  std::shared_ptr<SimulatedTarget> sim_target;  // set with --backend sim
};

Runtime make_runtime(const Globals& g, const RunConfig& c, const std::set<std::string>& members = {}) {
  Runtime rt;
  if (g.backend == "sim") {
    auto cfg = sim_config(g, c);
    cfg.members = members;
    // Simulator replies depend on its knobs, which are not part of the cache key: keep them in memory.
    auto cache = std::make_shared<ResponseCache>();
    auto assistant = std::make_shared<ModelClient>(std::make_shared<SimulatedAssistant>(cfg), cache);
    rt.sim_target = std::make_shared<SimulatedTarget>(cfg);
    auto target = std::make_shared<ModelClient>(rt.sim_target, cache);
    rt.backends = {assistant, assistant, assistant, assistant, assistant, target};
    return rt;
  }
  if (g.backend != "http") throw InvalidInput("--backend must be http or sim");
  auto cache = std::make_shared<ResponseCache>(c.cache_path());
  auto client_for = [&](Role role) {
    auto ep = endpoint_from_env(role);
    if (const auto it = c.endpoints.find(std::string(role_name(role))); it != c.endpoints.end()) {
      if (!it->second.base_url.empty()) ep.base_url = it->second.base_url;
      if (!it->second.model.empty()) ep.model = it->second.model;
      ep.requests_per_minute = static_cast<int>(it->second.requests_per_minute);
      ep.timeout_seconds = static_cast<int>(it->second.timeout_seconds);
    }
    return std::make_shared<ModelClient>(std::make_shared<HttpBackend>(ep), cache);
  };
  rt.backends = {client_for(Role::segmenter), client_for(Role::captioner), client_for(Role::generator),
                 client_for(Role::reasoner),  client_for(Role::embedder),  client_for(Role::target)};
  return rt;
}

std::set<std::string> member_ids(const BenchmarkManifest& m) {
  std::set<std::string> ids;
  for (const auto& r : m.records)
    if (r.label == 1) ids.insert(r.sample_id);
  return ids;
}

std::map<std::string, int> labels_of(const BenchmarkManifest& m) {
  std::map<std::string, int> out;
  for (const auto& r : m.records)
    if (r.label) out[r.sample_id] = *r.label;
  return out;
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

void write_failures(const fs::path& file, const std::vector<FailureRecord>& failures) {
  write_file_atomic(file, failures_to_jsonl(failures));
  std::cerr << failures.size() << " failure(s) written to " << file.string() << "\n";
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

// ---- bench -----------------------------------------------------------------

struct BenchIidArgs {
  std::string members, nonmembers, out;
  std::size_t n = 200;
};

int bench_iid(const Globals& g, const BenchIidArgs& a) {
  const auto m = build_iid_manifest(load_pool(a.members), load_pool(a.nonmembers), a.n, g.seed);
  write_manifest(a.out, m);
  std::cout << "wrote " << m.records.size() << " records (" << a.n << " per class) to " << a.out << "\n";
  return kExitOk;
}

struct BenchCutoffArgs {
  std::string pool, cutoff, out;
};

int bench_cutoff(const BenchCutoffArgs& a) {
  const auto res = build_cutoff_manifest(load_pool(a.pool), a.cutoff);
  write_manifest(a.out, res.manifest);
  std::string rejected;
  for (const auto& r : res.rejected) rejected += json{{"sample_id", r.sample_id}, {"reason", r.reason}}.dump() + "\n";
  const auto rejected_file = a.out + ".rejected.jsonl";
  write_file_atomic(rejected_file, rejected);
  const auto members = member_ids(res.manifest).size();
  std::cout << "wrote " << res.manifest.records.size() << " records (" << members << " before " << a.cutoff
            << "), rejected " << res.rejected.size() << " (see " << rejected_file << ")\n";
  return kExitOk;
}

// ---- probes / calibrate / attack -------------------------------------------

struct ProbesArgs {
  std::string manifest, out;
};

int probes_build(const Globals& g, const ProbesArgs& a) {
  const auto c = resolve_config(g);
  const auto manifest = read_manifest(or_default(a.manifest, c.manifest));
  const auto out = or_default(a.out, fs::path(c.workdir) / "probes");
  auto rt = make_runtime(g, c);
  ProbeOptions opts;
  opts.num_alternatives = c.attack.num_alternatives;

  std::vector<std::optional<FailureRecord>> failures(manifest.records.size());
  std::atomic<std::size_t> built{0}, skipped{0};
  parallel_for(manifest.records.size(), c.attack.concurrency, [&](std::size_t i) {
    const auto& rec = manifest.records[i];
    if (fs::exists(out / (rec.sample_id + ".json"))) {
      ++skipped;
      return;
    }
    try {
      const auto bytes = rec.load_bytes();
      const auto set = build_probe_set(rec, decode_image(bytes), rt.backends, opts, c.attack.seed);
      write_probe_set(out, set);
      ++built;
    } catch (const Error& e) {
      failures[i] = FailureRecord{rec.sample_id, "probes", e.what()};
    }
  });
  std::vector<FailureRecord> failed;
  for (auto& f : failures)
    if (f) failed.push_back(std::move(*f));
  std::cout << "probe sets: " << built << " built, " << skipped << " already present, " << failed.size()
            << " failed -> " << out.string() << "\n";
  if (!failed.empty()) {
    write_failures(out / "failures.jsonl", failed);
    return kExitPartial;
  }
  return kExitOk;
}

struct CalibrateArgs {
  std::string manifest, probes, out;
};

int calibrate(const Globals& g, const CalibrateArgs& a) {
  const auto c = resolve_config(g);
  const auto manifest = read_manifest(or_default(a.manifest, c.manifest));
  const auto probes_dir = or_default(a.probes, fs::path(c.workdir) / "probes");
  const auto out = or_default(a.out, fs::path(c.workdir) / "calibration");
  fs::create_directories(out);
  auto rt = make_runtime(g, c);
  CalibrationOptions opts;
  opts.top_n = c.attack.top_n;
  opts.rationality_trials = c.attack.rationality_trials;

  std::vector<std::optional<FailureRecord>> failures(manifest.records.size());
  parallel_for(manifest.records.size(), c.attack.concurrency, [&](std::size_t i) {
    const auto& rec = manifest.records[i];
    try {
      const auto set = read_probe_set(probes_dir / (rec.sample_id + ".json"));
      const auto res = calibrate_probe_set(set, rec.load_bytes(), rt.backends, opts);
      write_calibration(out / (rec.sample_id + ".jsonl"), res);
    } catch (const Error& e) {
      failures[i] = FailureRecord{rec.sample_id, "calibration", e.what()};
    }
  });
  std::vector<FailureRecord> failed;
  for (auto& f : failures)
    if (f) failed.push_back(std::move(*f));
  std::cout << "calibrated " << manifest.records.size() - failed.size() << " of " << manifest.records.size()
            << " samples -> " << out.string() << "\n";
  if (!failed.empty()) {
    write_failures(out / "failures.jsonl", failed);
    return kExitPartial;
  }
  return kExitOk;
}

struct AttackArgs {
  std::string manifest, probes, calibration, out, journal;
  bool no_filter = false;
  std::vector<double> temps{0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
};

struct AttackInputs {
  BenchmarkManifest manifest;
  std::vector<SampleInputs> samples;
  std::vector<FailureRecord> missing;
};

AttackInputs load_attack_inputs(const RunConfig& c, const AttackArgs& a) {
  AttackInputs in;
  in.manifest = read_manifest(or_default(a.manifest, c.manifest));
  const auto probes_dir = or_default(a.probes, fs::path(c.workdir) / "probes");
  const auto calib_dir = or_default(a.calibration, fs::path(c.workdir) / "calibration");
  for (const auto& rec : in.manifest.records) {
    const auto probe_file = probes_dir / (rec.sample_id + ".json");
    if (!fs::exists(probe_file)) {
      in.missing.push_back({rec.sample_id, "attack", "no probe set at " + probe_file.string()});
      continue;
    }
    SampleInputs s;
    s.sample_id = rec.sample_id;
    s.label = rec.label;
    s.probes = read_probe_set(probe_file).probes;
    if (!a.no_filter) {
      const auto calib_file = calib_dir / (rec.sample_id + ".jsonl");
      if (!fs::exists(calib_file)) {
        in.missing.push_back({rec.sample_id, "attack", "no calibration at " + calib_file.string()});
        continue;
      }
      // Re-select with the current N so the same calibration serves several ablation arms.
      s.calibration = select_top_n(read_calibration(calib_file), c.attack.top_n);
    }
    in.samples.push_back(std::move(s));
  }
  return in;
}

void register_sim_probes(const Runtime& rt, const std::vector<SampleInputs>& samples) {
  if (!rt.sim_target) return;
  for (const auto& s : samples)
    for (const auto& p : s.probes) rt.sim_target->register_probe(p);
}

int attack_run(const Globals& g, const AttackArgs& a) {
  const auto c = resolve_config(g);
  auto in = load_attack_inputs(c, a);
  auto rt = make_runtime(g, c, member_ids(in.manifest));
  register_sim_probes(rt, in.samples);
  const auto journal = or_default(a.journal, fs::path(c.workdir) / "attack_journal.jsonl");
  const auto out = or_default(a.out, fs::path(c.workdir) / "scores_kcmp.jsonl");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  if (journal.has_parent_path()) fs::create_directories(journal.parent_path());

  auto outcome = run_attack(in.samples, *rt.backends.target, c.attack, journal);
  write_file_atomic(out, score_set_to_jsonl(outcome.scores));
  std::cout << "scored " << outcome.scores.entries.size() << " samples (" << outcome.unscored
            << " without selected probes) -> " << out.string() << "\n";
  auto failures = std::move(in.missing);
  failures.insert(failures.end(), outcome.failures.begin(), outcome.failures.end());
  if (!failures.empty()) {
    write_failures(out.string() + ".failures.jsonl", failures);
    return kExitPartial;
  }
  return kExitOk;
}

int attack_sweep(const Globals& g, const AttackArgs& a) {
  const auto c = resolve_config(g);
  auto in = load_attack_inputs(c, a);
  auto rt = make_runtime(g, c, member_ids(in.manifest));
  register_sim_probes(rt, in.samples);
  const auto out = or_default(a.out, fs::path(c.workdir) / "temperature_sweep.csv");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto table = temperature_sweep(in.samples, *rt.backends.target, a.temps, c.attack);
  std::string csv = "temperature,auc,scored\n";
  for (const auto& pt : table) {
    csv += format_double(pt.temperature) + "," + format_double(pt.auc) + "," + std::to_string(pt.scored) + "\n";
    std::cout << "T=" << fmt(pt.temperature, 2) << "  AUC " << fmt(pt.auc) << "  (" << pt.scored << " scored)\n";
  }
  write_file_atomic(out, csv);
  if (!in.missing.empty()) {
    write_failures(out.string() + ".failures.jsonl", in.missing);
    return kExitPartial;
  }
  return kExitOk;
}

// ---- baselines -------------------------------------------------------------

struct BaselineArgs {
  std::string method, traces, augmented, descriptions, labels, out;
  double k = 20.0;
  double alpha = 0.5;
  std::string similarity = "rouge";
};

std::string baseline_method_name(const BaselineArgs& a) {
  if (a.method == "min_k") return "min_k-" + format_double(a.k);
  if (a.method == "max_renyi") return "max_renyi-k" + format_double(a.k) + "-a" + format_double(a.alpha);
  if (a.method == "mod_renyi") return "mod_renyi-" + std::string(baselines::kModRenyiVariant) + "-a" + format_double(a.alpha);
  if (a.method == "image_infer") return "image_infer-" + a.similarity;
  return a.method;
}

int baseline_score(const Globals& g, const BaselineArgs& a) {
  using namespace baselines;
  ScoreSet scores{baseline_method_name(a), {}};
  if (a.method == "image_infer") {
    if (a.descriptions.empty()) throw InvalidInput("image_infer needs --descriptions");
    std::shared_ptr<ModelClient> embedder;
    Similarity sim = Similarity::rouge_l;
    if (a.similarity == "embedding") {
      sim = Similarity::embedding;
      embedder = make_runtime(g, resolve_config(g)).backends.embedder;
    } else if (a.similarity != "rouge") {
      throw InvalidInput("--similarity must be rouge or embedding");
    }
    for (const auto& b : read_descriptions(a.descriptions))
      scores.entries.push_back({b.sample_id, image_infer_score(b, sim, embedder.get()), std::nullopt});
  } else {
    if (a.traces.empty()) throw InvalidInput(a.method + " needs --traces");
    const auto traces = read_traces(a.traces);
    std::map<std::string, InferenceTrace> augmented;
    if (a.method == "aug_kl") {
      if (a.augmented.empty()) throw InvalidInput("aug_kl needs --augmented");
      for (auto& t : read_traces(a.augmented)) augmented.emplace(t.sample_id, std::move(t));
    }
    for (const auto& t : traces) {
      double s = 0;
      if (a.method == "perplexity") s = perplexity_score(t);
      else if (a.method == "min_k") s = min_k_score(t, a.k);
      else if (a.method == "max_prob_gap") s = max_prob_gap_score(t);
      else if (a.method == "max_renyi") s = max_renyi_k_score(t, a.alpha, a.k);
      else if (a.method == "mod_renyi") s = mod_renyi_score(t, a.alpha);
      else if (a.method == "aug_kl") {
        const auto it = augmented.find(t.sample_id);
        if (it == augmented.end()) throw InvalidInput("no augmented trace for " + t.sample_id);
        s = aug_kl_score(t, it->second);
      } else {
        throw InvalidInput("unknown baseline method '" + a.method + "'");
      }
      scores.entries.push_back({t.sample_id, s, std::nullopt});
    }
  }
  if (!a.labels.empty()) attach_labels(scores, labels_of(read_manifest(a.labels)));
  scores.validate();
  const auto out = or_default(a.out, fs::path(g.workdir) / ("scores_" + scores.method + ".jsonl"));
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file_atomic(out, score_set_to_jsonl(scores));
  std::cout << "scored " << scores.entries.size() << " samples with " << scores.method << " -> " << out.string() << "\n";
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> scores;
  std::string labels, out;
  std::vector<int> k;
  int trials = 0;
};

std::vector<ScoreSet> load_scores(const EvalArgs& a) {
  std::map<std::string, int> labels;
  if (!a.labels.empty()) labels = labels_of(read_manifest(a.labels));
  std::vector<ScoreSet> sets;
  for (const auto& f : a.scores) {
    auto s = read_score_set(f);
    attach_labels(s, labels);
    sets.push_back(std::move(s));
  }
  return sets;
}

int eval_auc(const EvalArgs& a) {
  for (const auto& s : load_scores(a)) {
    const auto pos = s.scores_with_label(1);
    const auto neg = s.scores_with_label(0);
    if (pos.empty() || neg.empty()) throw InvalidInput(s.method + ": AUC needs labeled members and non-members");
    std::cout << json{{"method", s.method}, {"auc", auc(pos, neg)}, {"members", pos.size()}, {"nonmembers", neg.size()}}
                     .dump()
              << "\n";
  }
  return kExitOk;
}

int eval_setlevel(const Globals& g, const EvalArgs& a) {
  const auto c = resolve_config(g);
  const auto ks = a.k.empty() ? c.set_sizes : a.k;
  const int trials = a.trials > 0 ? a.trials : c.set_trials;
  for (const auto& s : load_scores(a)) {
    json row{{"method", s.method}};
    for (int k : ks) {
      auto rng = Rng::derive(c.attack.seed, "setlevel/" + s.method + "/" + std::to_string(k));
      const auto r = set_level_eval(s, k, trials, rng);
      row["set_level"][std::to_string(k)] = {{"accuracy", r.accuracy}, {"trials", r.trials}, {"ties", r.ties}};
    }
    std::cout << row.dump() << "\n";
  }
  return kExitOk;
}

int eval_report(const Globals& g, const EvalArgs& a) {
  ReportInputs in;
  in.config = resolve_config(g);
  if (!a.k.empty()) in.config.set_sizes = a.k;
  if (a.trials > 0) in.config.set_trials = a.trials;
  in.config.validate();
  std::vector<fs::path> files(a.scores.begin(), a.scores.end());
  if (!a.labels.empty()) files.emplace_back(a.labels);
  in.input_hashes = hash_inputs(files);
  in.methods = load_scores(a);
  const auto out = or_default(a.out, fs::path(in.config.workdir) / "report");
  write_report(out, in);
  const auto report = build_report(in);
  for (const auto& m : report["methods"]) {
    std::cout << std::left << std::setw(28) << m["method"].get<std::string>() << " AUC "
              << (m["auc"].is_null() ? std::string("n/a") : fmt(m["auc"].get<double>()));
    for (const auto& [k, v] : m["set_level"].items())
      std::cout << "  K=" << k << " " << (v.is_null() ? std::string("n/a") : fmt(v["accuracy"].get<double>()));
    std::cout << "\n";
  }
  std::cout << "report -> " << (out / "report.json").string() << "\n";
  return kExitOk;
}

// ---- simulate / cost -------------------------------------------------------

struct SimulateArgs {
  std::size_t n = 300;
  std::string out;
  bool images = true;
};

int simulate(const Globals& g, const SimulateArgs& a) {
  const auto c = resolve_config(g);
  SimulationOptions opt;
  opt.sim = sim_config(g, c);
  opt.attack = c.attack;
  auto samples = synthesize_benchmark(a.n, a.n, c.attack.seed);
  opt.sim.members = labeled_members(samples);
  const auto run = run_simulation(samples, opt);

  const auto out = or_default(a.out, fs::path(c.workdir) / "sim");
  fs::create_directories(out);
  write_file_atomic(out / "scores_kcmp.jsonl", score_set_to_jsonl(run.outcome.scores));
  if (a.images) {
    BenchmarkManifest m;
    m.name = "simulated";
    m.seed = c.attack.seed;
    m.notes = "synthetic scenes; labels are the simulator's membership";
    fs::create_directories(out / "images");
    for (const auto& s : samples) {
      auto rec = s.record;
      rec.image_path = "images/" + rec.sample_id + ".png";
      write_file_atomic(out / rec.image_path, rec.image_bytes);
      rec.image_bytes.clear();
      m.records.push_back(std::move(rec));
    }
    write_manifest(out / "manifest.jsonl", m);
  }
  const double a_uc = auc(run.outcome.scores.scores_with_label(1), run.outcome.scores.scores_with_label(0));
  std::cout << "simulated " << samples.size() << " samples (pm=" << opt.sim.p_member << ", pn=" << opt.sim.p_nonmember
            << "), AUC " << fmt(a_uc) << " -> " << (out / "scores_kcmp.jsonl").string() << "\n";
  auto failures = run.construction_failures;
  failures.insert(failures.end(), run.outcome.failures.begin(), run.outcome.failures.end());
  if (!failures.empty()) {
    write_failures(out / "failures.jsonl", failures);
    return kExitPartial;
  }
  return kExitOk;
}

struct CostArgs {
  double probes = 0.0;
  int r = 4;
  std::uint64_t images = 1000;
  std::string model, prices;
};

int cost(const CostArgs& a) {
  const auto table = a.prices.empty() ? default_price_table() : read_price_table(a.prices);
  std::vector<PriceRow> rows;
  if (a.model.empty()) rows = table.rows;
  else rows.push_back(table.find(a.model));
  for (const auto& row : rows) {
    const auto e = cost_estimate(a.probes, a.r, a.images, row);
    std::cout << row.model_name << ": " << e.queries_per_image << " queries/image, " << e.total_queries
              << " queries for " << a.images << " images, $" << fmt(e.total_cost, 2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box membership auditing for vision-language models"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--config", g.config_file, "TOML or JSON run config; overrides flags")->check(CLI::ExistingFile);
  app.add_option("--backend", g.backend, "http (credentials from KCMP_API_KEY / KCMP_API_BASE) or sim")
      ->check(CLI::IsMember({"http", "sim"}));
  app.add_option("--workdir", g.workdir, "directory for intermediate files and the response cache");
  app.add_option("--cache-dir", g.cache_dir, "response cache directory (default <workdir>/cache)");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--concurrency", g.concurrency, "parallel workers")->check(CLI::PositiveNumber);
  app.add_option("--alternatives", g.k, "alternatives per probe (K)");
  app.add_option("--n", g.n, "probes kept per sample after calibration, or \"all\"");
  app.add_option("--r", g.r, "repeats per probe (R)");
  app.add_option("--temperature", g.temperature, "target sampling temperature");
  app.add_option("--sim-pm", g.sim_pm, "simulator: member accuracy");
  app.add_option("--sim-pn", g.sim_pn, "simulator: non-member accuracy");
  app.add_option("--sim-pg", g.sim_pg, "simulator: member accuracy on grounded probes");
  app.add_option("--sim-noise-slope", g.sim_noise_slope, "simulator: P(random answer) per unit temperature");

  std::function<int()> action;

  auto* bench = app.add_subcommand("bench", "build benchmark manifests");
  bench->require_subcommand(1);
  BenchIidArgs iid;
  auto* iid_cmd = bench->add_subcommand("build-iid", "member/non-member split from two pools");
  iid_cmd->add_option("--members", iid.members, "member pool (directory or manifest)")->required();
  iid_cmd->add_option("--nonmembers", iid.nonmembers, "non-member pool (directory or manifest)")->required();
  iid_cmd->add_option("--count", iid.n, "samples per class")->required();
  iid_cmd->add_option("--out", iid.out, "manifest to write")->required();
  iid_cmd->callback([&] { action = [&] { return bench_iid(g, iid); }; });

  BenchCutoffArgs cut;
  auto* cut_cmd = bench->add_subcommand("build-cutoff", "label by capture date against a training cutoff");
  cut_cmd->add_option("--pool", cut.pool, "manifest with dates")->required();
  cut_cmd->add_option("--cutoff", cut.cutoff, "YYYY-MM-DD")->required();
  cut_cmd->add_option("--out", cut.out, "manifest to write")->required();
  cut_cmd->callback([&] { action = [&] { return bench_cutoff(cut); }; });

  auto* probes = app.add_subcommand("probes", "probe construction");
  probes->require_subcommand(1);
  ProbesArgs pa;
  auto* probes_cmd = probes->add_subcommand("build", "segment images and build shape/color probes");
  probes_cmd->add_option("--manifest", pa.manifest, "benchmark manifest");
  probes_cmd->add_option("--out", pa.out, "probe directory (default <workdir>/probes)");
  probes_cmd->callback([&] { action = [&] { return probes_build(g, pa); }; });

  CalibrateArgs ca;
  auto* calib_cmd = app.add_subcommand("calibrate", "score probes by relevance and rationality, keep top N");
  calib_cmd->add_option("--manifest", ca.manifest, "benchmark manifest");
  calib_cmd->add_option("--probes", ca.probes, "probe directory");
  calib_cmd->add_option("--out", ca.out, "calibration directory (default <workdir>/calibration)");
  calib_cmd->callback([&] { action = [&] { return calibrate(g, ca); }; });

  auto* attack = app.add_subcommand("attack", "query the target with probes");
  attack->require_subcommand(1);
  AttackArgs aa;
  auto add_attack_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--manifest", aa.manifest, "benchmark manifest");
    cmd->add_option("--probes", aa.probes, "probe directory");
    cmd->add_option("--calibration", aa.calibration, "calibration directory");
    cmd->add_flag("--no-filter", aa.no_filter, "use every probe, ignoring calibration");
    cmd->add_option("--out", aa.out, "output file");
  };
  auto* run_cmd = attack->add_subcommand("run", "sample-level detection scores");
  add_attack_inputs(run_cmd);
  run_cmd->add_option("--journal", aa.journal, "resume journal (default <workdir>/attack_journal.jsonl)");
  run_cmd->callback([&] { action = [&] { return attack_run(g, aa); }; });
  auto* sweep_cmd = attack->add_subcommand("sweep-temp", "AUC at several target temperatures");
  add_attack_inputs(sweep_cmd);
  sweep_cmd->add_option("--temps", aa.temps, "temperatures in [0, 1]")->delimiter(',');
  sweep_cmd->callback([&] { action = [&] { return attack_sweep(g, aa); }; });

  auto* baseline = app.add_subcommand("baseline", "reference scorers");
  baseline->require_subcommand(1);
  BaselineArgs ba;
  auto* score_cmd = baseline->add_subcommand("score", "score traces or descriptions");
  score_cmd->add_option("--method", ba.method, "scorer")
      ->required()
      ->check(CLI::IsMember({"perplexity", "min_k", "max_prob_gap", "aug_kl", "max_renyi", "mod_renyi", "image_infer"}));
  score_cmd->add_option("--traces", ba.traces, "token trace JSONL");
  score_cmd->add_option("--augmented", ba.augmented, "traces of augmented images (aug_kl)");
  score_cmd->add_option("--descriptions", ba.descriptions, "repeated descriptions JSONL (image_infer)");
  score_cmd->add_option("--similarity", ba.similarity, "image_infer similarity: rouge or embedding");
  score_cmd->add_option("--k", ba.k, "percent of tokens (min_k, max_renyi)");
  score_cmd->add_option("--alpha", ba.alpha, "Renyi order");
  score_cmd->add_option("--labels", ba.labels, "manifest providing labels");
  score_cmd->add_option("--out", ba.out, "score file");
  score_cmd->callback([&] { action = [&] { return baseline_score(g, ba); }; });

  auto* eval = app.add_subcommand("eval", "metrics");
  eval->require_subcommand(1);
  EvalArgs ea;
  auto add_eval_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--scores", ea.scores, "score file(s)")->required();
    cmd->add_option("--labels", ea.labels, "manifest providing labels");
  };
  auto* auc_cmd = eval->add_subcommand("auc", "sample-level AUC");
  add_eval_inputs(auc_cmd);
  auc_cmd->callback([&] { action = [&] { return eval_auc(ea); }; });
  auto* set_cmd = eval->add_subcommand("setlevel", "set-level accuracy");
  add_eval_inputs(set_cmd);
  set_cmd->add_option("--k", ea.k, "set size (repeatable)");
  set_cmd->add_option("--trials", ea.trials, "trials per set size");
  set_cmd->callback([&] { action = [&] { return eval_setlevel(g, ea); }; });
  auto* report_cmd = eval->add_subcommand("report", "report.json plus ROC CSV/SVG per method");
  add_eval_inputs(report_cmd);
  report_cmd->add_option("--k", ea.k, "set size (repeatable)");
  report_cmd->add_option("--trials", ea.trials, "trials per set size");
  report_cmd->add_option("--out", ea.out, "report directory (default <workdir>/report)");
  report_cmd->callback([&] { action = [&] { return eval_report(g, ea); }; });

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "full pipeline against simulated models");
  sim_cmd->add_option("--pm", g.sim_pm, "member accuracy");
  sim_cmd->add_option("--pn", g.sim_pn, "non-member accuracy");
  sim_cmd->add_option("--n", sa.n, "samples per class");
  sim_cmd->add_option("--out", sa.out, "output directory (default <workdir>/sim)");
  sim_cmd->add_flag("!--no-images", sa.images, "skip writing images and manifest");
  sim_cmd->callback([&] { action = [&] { return simulate(g, sa); }; });

  auto* cost_grp = app.add_subcommand("cost", "query budgeting");
  cost_grp->require_subcommand(1);
  CostArgs co;
  auto* cost_cmd = cost_grp->add_subcommand("estimate", "queries and dollars for a run");
  cost_cmd->add_option("--probes", co.probes, "average probes per image")->required();
  cost_cmd->add_option("--r", co.r, "repeats per probe");
  cost_cmd->add_option("--images", co.images, "number of images");
  cost_cmd->add_option("--model", co.model, "price row (default: all)");
  cost_cmd->add_option("--prices", co.prices, "price table TOML");
  cost_cmd->callback([&] { action = [&] { return cost(co); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return action();
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const ProtocolError& e) {
    std::cerr << "backend protocol error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}
