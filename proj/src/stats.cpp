#include "kcmp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <unordered_set>

#include "kcmp/error.hpp"

namespace kcmp {

void ScoreSet::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.sample_id).second)
      throw InvalidInput("score set '" + method + "': duplicate sample_id " + e.sample_id);
    if (!std::isfinite(e.score))
      throw InvalidInput("score set '" + method + "': non-finite score for " + e.sample_id);
    if (e.label && *e.label != 0 && *e.label != 1)
      throw InvalidInput("score set '" + method + "': label must be 0 or 1 for " + e.sample_id);
  }
}

std::vector<double> ScoreSet::scores_with_label(int label) const {
  std::vector<double> out;
  for (const auto& e : entries)
    if (e.label && *e.label == label) out.push_back(e.score);
  return out;
}

double auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty())
    throw InvalidInput("auc: both score lists must be non-empty");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(positives.begin(), positives.end(), finite) ||
      !std::all_of(negatives.begin(), negatives.end(), finite))
    throw InvalidInput("auc: scores must be finite");

  std::vector<double> neg(negatives.begin(), negatives.end());
  std::sort(neg.begin(), neg.end());
  // Twice the U statistic as an integer keeps the result an exact rational.
  std::uint64_t twice_u = 0;
  for (double p : positives) {
    const auto [lo, hi] = std::equal_range(neg.begin(), neg.end(), p);
    twice_u += 2 * static_cast<std::uint64_t>(lo - neg.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

RocCurve roc_curve(const ScoreSet& scores) {
  scores.validate();
  std::vector<std::pair<double, int>> rows;
  rows.reserve(scores.entries.size());
  std::uint64_t n_pos = 0;
  std::uint64_t n_neg = 0;
  for (const auto& e : scores.entries) {
    if (!e.label) throw InvalidInput("roc_curve: entry " + e.sample_id + " has no label");
    rows.emplace_back(e.score, *e.label);
    (*e.label == 1 ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) throw InvalidInput("roc_curve: both classes must be present");

  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t twice_area = 0;  // in units of 1/(n_pos*n_neg)
  for (std::size_t i = 0; i < rows.size();) {
    const double threshold = rows[i].first;
    const std::uint64_t tp0 = tp;
    const std::uint64_t fp0 = fp;
    for (; i < rows.size() && rows[i].first == threshold; ++i) (rows[i].second == 1 ? tp : fp) += 1;
    twice_area += (fp - fp0) * (tp + tp0);
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  curve.auc = static_cast<double>(twice_area) /
              (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return curve;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("mean of an empty list");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace kcmp
