#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcmp/backends.hpp"
#include "kcmp/rng.hpp"

// Reference membership scorers. Every score is sign-normalized so that higher
// means "more likely a member".
namespace kcmp::baselines {

struct TokenRecord {
  std::string token;
  double logprob_true = 0.0;  // log-probability of the generated token, <= 0
  std::vector<std::pair<std::string, double>> top;  // descending probabilities
};

struct InferenceTrace {
  std::string sample_id;
  std::string slice;  // "inst" or "desp"
  std::vector<TokenRecord> tokens;

  void validate() const;
  nlohmann::json to_json() const;
  static InferenceTrace from_json(const nlohmann::json& j);
};

/// JSONL `{sample_id, slice, tokens:[{t, lp, top:[[tok,p],...]}]}`.
std::vector<InferenceTrace> read_traces(const std::filesystem::path& file);
std::string traces_to_jsonl(std::span<const InferenceTrace> traces);

struct DescriptionBundle {
  std::string sample_id;
  std::vector<std::string> descriptions;
};
std::vector<DescriptionBundle> read_descriptions(const std::filesystem::path& file);

/// Floor applied to probabilities before renormalizing, for KL.
inline constexpr double kProbabilityFloor = 1e-9;

/// -exp(-mean logprob).
double perplexity_score(const InferenceTrace& trace);

/// Mean of the ceil(k% * n) smallest token log-probabilities.
double min_k_score(const InferenceTrace& trace, double k_percent);

/// Mean over positions of p_top1 - p_top2.
double max_prob_gap_score(const InferenceTrace& trace);

/// -mean positionwise KL(original || augmented). Each position compares the
/// two top-k lists over the union of their tokens: missing tokens get 0,
/// every probability is floored at kProbabilityFloor, then renormalized.
double aug_kl_score(const InferenceTrace& original, const InferenceTrace& augmented);

/// KL(p || q) with the floor-and-renormalize rule above; inputs are aligned.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Renyi entropy of order alpha (natural log); alpha == 1 is Shannon entropy.
double renyi_entropy(std::span<const double> dist, double alpha);

/// -mean of the ceil(k% * n) largest per-position Renyi entropies of the
/// renormalized top-k distributions.
double max_renyi_k_score(const InferenceTrace& trace, double alpha, double k_percent);

/// Variant "mode-sub": per position, the mode's probability is replaced by the
/// true token's probability and the remaining mass rescaled to 1 - p_true
/// (collected into one residual bucket when the rest is empty). Score is
/// -mean Renyi entropy over positions.
double mod_renyi_score(const InferenceTrace& trace, double alpha);
inline constexpr std::string_view kModRenyiVariant = "mode-sub";

/// ROUGE-L F1 on whitespace tokens (normalized text).
double rouge_l_f1(std::string_view reference, std::string_view candidate);

enum class Similarity { rouge_l, embedding };

/// Mean pairwise similarity over unordered description pairs.
double image_infer_score(const DescriptionBundle& bundle, Similarity similarity, ModelClient* embedder = nullptr);

/// Synthetic traces for tests and demos: per-token true-token probability is
/// Beta-like around `mean_true_prob`, top-2 built around it.
InferenceTrace synthesize_trace(const std::string& sample_id, std::string slice, std::size_t length,
                                double mean_true_prob, Rng& rng);

}  // namespace kcmp::baselines
