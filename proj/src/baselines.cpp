#include "kcmp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "kcmp/calibration.hpp"
#include "kcmp/encoding.hpp"
#include "kcmp/error.hpp"
#include "kcmp/text.hpp"

namespace kcmp::baselines {

using nlohmann::json;

// ---- trace files -----------------------------------------------------------

void InferenceTrace::validate() const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (!std::isfinite(t.logprob_true) || t.logprob_true > 1e-12)
      throw InvalidInput("trace " + sample_id + ": token " + std::to_string(i) + " has an invalid log-probability");
    double sum = 0.0;
    for (std::size_t j = 0; j < t.top.size(); ++j) {
      const double p = t.top[j].second;
      if (!(p > 0.0 && p <= 1.0))
        throw InvalidInput("trace " + sample_id + ": probability outside (0, 1] at token " + std::to_string(i));
      if (j > 0 && p > t.top[j - 1].second)
        throw InvalidInput("trace " + sample_id + ": top list not sorted at token " + std::to_string(i));
      sum += p;
    }
    if (sum > 1.0 + 1e-6)
      throw InvalidInput("trace " + sample_id + ": top probabilities sum above 1 at token " + std::to_string(i));
  }
}

json InferenceTrace::to_json() const {
  json toks = json::array();
  for (const auto& t : tokens) {
    json top = json::array();
    for (const auto& [tok, p] : t.top) top.push_back(json::array({tok, p}));
    toks.push_back({{"t", t.token}, {"lp", t.logprob_true}, {"top", std::move(top)}});
  }
  return json{{"sample_id", sample_id}, {"slice", slice}, {"tokens", std::move(toks)}};
}

InferenceTrace InferenceTrace::from_json(const json& j) {
  InferenceTrace trace;
  trace.sample_id = j.at("sample_id").get<std::string>();
  trace.slice = j.value("slice", "");
  for (const auto& tj : j.at("tokens")) {
    TokenRecord t;
    t.token = tj.value("t", "");
    t.logprob_true = tj.at("lp").get<double>();
    if (tj.contains("top"))
      for (const auto& pair : tj["top"]) t.top.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<double>());
    trace.tokens.push_back(std::move(t));
  }
  trace.validate();
  return trace;
}

std::vector<InferenceTrace> read_traces(const std::filesystem::path& file) {
  std::vector<InferenceTrace> traces;
  std::istringstream in(read_file(file));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) traces.push_back(InferenceTrace::from_json(json::parse(line)));
  return traces;
}

std::string traces_to_jsonl(std::span<const InferenceTrace> traces) {
  std::string out;
  for (const auto& t : traces) out += t.to_json().dump() + "\n";
  return out;
}

std::vector<DescriptionBundle> read_descriptions(const std::filesystem::path& file) {
  std::vector<DescriptionBundle> out;
  std::istringstream in(read_file(file));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    out.push_back({j.at("sample_id").get<std::string>(), j.at("descriptions").get<std::vector<std::string>>()});
  }
  return out;
}

// ---- helpers ---------------------------------------------------------------

namespace {

void require_tokens(const InferenceTrace& trace) {
  if (trace.tokens.empty()) throw InvalidInput("trace " + trace.sample_id + " has no tokens");
}

std::size_t top_count(std::size_t n, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) throw InvalidInput("k percent must lie in (0, 100]");
  // The epsilon keeps exact products such as 50% of 4 from rounding up.
  const auto c = static_cast<std::size_t>(std::ceil(k_percent * static_cast<double>(n) / 100.0 - 1e-9));
  return std::clamp<std::size_t>(c, 1, n);
}

std::vector<double> renormalized_top(const TokenRecord& t) {
  if (t.top.empty()) throw InvalidInput("token '" + t.token + "' carries no top-k distribution");
  std::vector<double> p;
  double sum = 0.0;
  for (const auto& [tok, prob] : t.top) {
    p.push_back(prob);
    sum += prob;
  }
  for (auto& v : p) v /= sum;
  return p;
}

}  // namespace

// ---- scorers ---------------------------------------------------------------

double perplexity_score(const InferenceTrace& trace) {
  require_tokens(trace);
  double sum = 0.0;
  for (const auto& t : trace.tokens) sum += t.logprob_true;
  return -std::exp(-sum / static_cast<double>(trace.tokens.size()));
}

double min_k_score(const InferenceTrace& trace, double k_percent) {
  require_tokens(trace);
  std::vector<double> lps;
  for (const auto& t : trace.tokens) lps.push_back(t.logprob_true);
  const auto k = top_count(lps.size(), k_percent);
  std::partial_sort(lps.begin(), lps.begin() + static_cast<std::ptrdiff_t>(k), lps.end());
  return std::accumulate(lps.begin(), lps.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
}

double max_prob_gap_score(const InferenceTrace& trace) {
  require_tokens(trace);
  double sum = 0.0;
  for (std::size_t i = 0; i < trace.tokens.size(); ++i) {
    const auto& top = trace.tokens[i].top;
    if (top.size() < 2)
      throw InvalidInput("trace " + trace.sample_id + ": position " + std::to_string(i) + " has fewer than 2 top entries");
    sum += top[0].second - top[1].second;
  }
  return sum / static_cast<double>(trace.tokens.size());
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) throw InvalidInput("KL inputs must be non-empty and aligned");
  std::vector<double> pf(p.begin(), p.end());
  std::vector<double> qf(q.begin(), q.end());
  for (auto* v : {&pf, &qf}) {
    double sum = 0.0;
    for (auto& x : *v) {
      if (x < 0.0 || !std::isfinite(x)) throw InvalidInput("KL inputs must be finite and non-negative");
      x = std::max(x, kProbabilityFloor);
      sum += x;
    }
    for (auto& x : *v) x /= sum;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < pf.size(); ++i) kl += pf[i] * std::log(pf[i] / qf[i]);
  return kl;
}

double aug_kl_score(const InferenceTrace& original, const InferenceTrace& augmented) {
  require_tokens(original);
  if (original.tokens.size() != augmented.tokens.size())
    throw InvalidInput("aug-KL: traces differ in length (" + std::to_string(original.tokens.size()) + " vs " +
                       std::to_string(augmented.tokens.size()) + ")");
  double total = 0.0;
  for (std::size_t i = 0; i < original.tokens.size(); ++i) {
    std::map<std::string, std::pair<double, double>> support;
    for (const auto& [tok, p] : original.tokens[i].top) support[tok].first = p;
    for (const auto& [tok, p] : augmented.tokens[i].top) support[tok].second = p;
    if (support.empty()) throw InvalidInput("aug-KL: empty distribution at position " + std::to_string(i));
    std::vector<double> p, q;
    for (const auto& [tok, pq] : support) {
      p.push_back(pq.first);
      q.push_back(pq.second);
    }
    total += kl_divergence(p, q);
  }
  return -total / static_cast<double>(original.tokens.size());
}

double renyi_entropy(std::span<const double> dist, double alpha) {
  if (dist.empty()) throw InvalidInput("Renyi entropy of an empty distribution");
  if (!(alpha > 0.0)) throw InvalidInput("Renyi order alpha must be positive");
  double sum = 0.0;
  for (double p : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("probabilities must be finite and non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InvalidInput("probabilities must sum to 1");
  if (alpha == 1.0) {
    double h = 0.0;
    for (double p : dist)
      if (p > 0.0) h -= p * std::log(p);
    return h;
  }
  // log-sum-exp of alpha * ln p keeps large alpha stable.
  double max_term = -std::numeric_limits<double>::infinity();
  for (double p : dist)
    if (p > 0.0) max_term = std::max(max_term, alpha * std::log(p));
  double acc = 0.0;
  for (double p : dist)
    if (p > 0.0) acc += std::exp(alpha * std::log(p) - max_term);
  return (max_term + std::log(acc)) / (1.0 - alpha);
}

double max_renyi_k_score(const InferenceTrace& trace, double alpha, double k_percent) {
  require_tokens(trace);
  std::vector<double> h;
  for (const auto& t : trace.tokens) h.push_back(renyi_entropy(renormalized_top(t), alpha));
  const auto k = top_count(h.size(), k_percent);
  std::partial_sort(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(k), h.end(), std::greater<>());
  return -std::accumulate(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
}

double mod_renyi_score(const InferenceTrace& trace, double alpha) {
  require_tokens(trace);
  double total = 0.0;
  for (const auto& t : trace.tokens) {
    auto q = renormalized_top(t);
    const double p_true = std::clamp(std::exp(t.logprob_true), 0.0, 1.0);
    const double rest = std::accumulate(q.begin() + 1, q.end(), 0.0);
    q[0] = p_true;
    if (rest > 0.0) {
      for (std::size_t i = 1; i < q.size(); ++i) q[i] *= (1.0 - p_true) / rest;
    } else if (p_true < 1.0) {
      q.push_back(1.0 - p_true);
    }
    total += renyi_entropy(q, alpha);
  }
  return -total / static_cast<double>(trace.tokens.size());
}

// ---- Image Infer -----------------------------------------------------------

double rouge_l_f1(std::string_view reference, std::string_view candidate) {
  const auto a = tokenize_words(reference);
  const auto b = tokenize_words(candidate);
  if (a.empty() || b.empty()) return 0.0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[b.size()]);
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(b.size());
  const double recall = lcs / static_cast<double>(a.size());
  return 2.0 * precision * recall / (precision + recall);
}

double image_infer_score(const DescriptionBundle& bundle, Similarity similarity, ModelClient* embedder) {
  const auto& d = bundle.descriptions;
  if (d.size() < 2) throw InvalidInput("image-infer needs at least two descriptions for " + bundle.sample_id);
  std::vector<std::vector<double>> vectors;
  if (similarity == Similarity::embedding) {
    if (!embedder) throw InvalidInput("embedding similarity needs an embedder backend");
    for (const auto& text : d) {
      BackendRequest r;
      r.role = Role::embedder;
      r.instruction = text;
      vectors.push_back(*embedder->query(r).vector);
    }
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = i + 1; j < d.size(); ++j, ++pairs)
      sum += similarity == Similarity::rouge_l ? rouge_l_f1(d[i], d[j]) : cosine_similarity(vectors[i], vectors[j]);
  return sum / static_cast<double>(pairs);
}

// ---- synthetic traces ------------------------------------------------------

InferenceTrace synthesize_trace(const std::string& sample_id, std::string slice, std::size_t length,
                                double mean_true_prob, Rng& rng) {
  InferenceTrace trace{sample_id, std::move(slice), {}};
  for (std::size_t i = 0; i < length; ++i) {
    const double jitter = (rng.uniform01() + rng.uniform01() - 1.0) * 0.3;
    const double p = std::clamp(mean_true_prob + jitter, 0.02, 0.999);
    const double rest = 1.0 - p;
    TokenRecord t;
    t.token = "w" + std::to_string(i);
    t.logprob_true = std::log(p);
    std::vector<std::pair<std::string, double>> top{
        {t.token, p}, {"alt1", rest * 0.6}, {"alt2", rest * 0.3}, {"alt3", rest * 0.1}};
    std::stable_sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    t.top = std::move(top);
    trace.tokens.push_back(std::move(t));
  }
  return trace;
}

}  // namespace kcmp::baselines
