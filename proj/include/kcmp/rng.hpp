#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <utility>
#include <vector>

namespace kcmp {

/// Deterministic pseudo-random generator used everywhere in the toolkit.
///
/// The algorithm is xoshiro256** (Blackman & Vigna), with the 256-bit state
/// expanded from the 64-bit seed by four SplitMix64 steps. Output depends only
/// on the seed, so candidate shuffles, benchmark splits, and simulator runs are
/// bit-reproducible across platforms. Never substitute std::mt19937 or
/// std::*_distribution here: their outputs are implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream for a named sub-task, e.g. derive(seed, "s12/o3/color").
  static Rng derive(std::uint64_t seed, std::string_view stream);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next();
  std::uint64_t operator()() { return next(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform integer in [0, bound). bound must be > 0. Unbiased (Lemire).
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

/// FNV-1a 64-bit hash; used to derive stream seeds from names.
std::uint64_t fnv1a64(std::string_view data);

/// Fisher-Yates shuffle driven by `rng`; returns a permutation of `items`.
template <class T>
std::vector<T> seeded_shuffle(std::vector<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
  return items;
}

/// `count` distinct indices from [0, population), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    Rng& rng);

}  // namespace kcmp
