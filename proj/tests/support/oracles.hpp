#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library's statistics code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace oracle {

/// All-pairs Mann-Whitney AUC with exact integer counting.
inline double brute_force_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::int64_t twice_u = 0;
  for (double p : pos)
    for (double n : neg) twice_u += p > n ? 2 : (p == n ? 1 : 0);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Binomial(n, p) probability mass function, computed in log space.
inline std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1, 0.0);
  for (int k = 0; k <= n; ++k) {
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    const double lp = log_choose + (k > 0 ? k * std::log(p) : 0.0) + (n - k > 0 ? (n - k) * std::log1p(-p) : 0.0);
    pmf[static_cast<std::size_t>(k)] = (p == 0.0) ? (k == 0 ? 1.0 : 0.0) : (p == 1.0 ? (k == n ? 1.0 : 0.0) : std::exp(lp));
  }
  return pmf;
}

/// P(X > Y) + 0.5 P(X == Y) for X ~ Bin(n, px), Y ~ Bin(n, py); scaling both
/// by 1/n does not change the comparison.
inline double binomial_auc(int n, double px, double py) {
  const auto fx = binomial_pmf(n, px);
  const auto fy = binomial_pmf(n, py);
  long double total = 0.0L;
  long double cdf_y = 0.0L;  // P(Y < i)
  for (int i = 0; i <= n; ++i) {
    total += static_cast<long double>(fx[i]) * (cdf_y + 0.5L * fy[i]);
    cdf_y += fy[i];
  }
  return static_cast<double>(total);
}

/// Expected set-level accuracy when each set aggregate is the mean of k
/// independent Bin(n, p)/n scores: the sums are Bin(n k, p), ties split evenly.
inline double set_level_accuracy(int n, int k, double pm, double pn) { return binomial_auc(n * k, pm, pn); }

/// Survival function of the chi-square distribution with 3 degrees of freedom.
inline double chi2_sf_df3(double x) {
  return std::erfc(std::sqrt(x / 2.0)) + std::sqrt(2.0 * x / std::numbers::pi) * std::exp(-x / 2.0);
}

/// Pearson chi-square statistic against a uniform expectation.
inline double chi2_uniform(const std::vector<std::int64_t>& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

/// Mean of the k smallest values, by full sort.
inline double mean_of_smallest(std::vector<double> v, std::size_t k) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s / static_cast<double>(k);
}

inline double shannon(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0) h -= x * std::log(x);
  return h;
}

/// Variance of -ln p under p; the first derivative of the Renyi entropy at
/// alpha = 1 is minus half of this.
inline double log_prob_variance(const std::vector<double>& p) {
  const double h = shannon(p);
  double v = 0.0;
  for (double x : p)
    if (x > 0) v += x * (std::log(x) + h) * (std::log(x) + h);
  return v;
}

}  // namespace oracle
