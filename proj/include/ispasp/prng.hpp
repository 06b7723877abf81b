#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace ispasp {

/// SplitMix64 finalizer step; used for seeding and stream derivation.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Seed for an independent stream: splitmix64 applied to
/// master XOR FNV-1a-64(label). Adding new labels never perturbs old ones.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept;

/// xoshiro256** generator seeded by four SplitMix64 outputs.
///
/// All derived quantities (uniform doubles, bounded integers, normals,
/// shuffles) are computed here instead of through <random> distributions,
/// whose output is implementation-defined, so a seed gives the same stream
/// on every platform.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) noexcept;

  static Prng stream(std::uint64_t master, std::string_view label) noexcept {
    return Prng(derive_seed(master, label));
  }

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n) by Lemire's rejection method; n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) noexcept;
  /// k distinct values from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace ispasp
