#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace nst {

/// Deterministic random source. The engine is std::mt19937_64 (whose output
/// sequence is fixed by the standard); every distribution on top of it is
/// implemented here rather than taken from <random>, so identical seeds give
/// identical draws on any platform or standard library.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  /// Derives an independent substream. Streams with different tags never
  /// share draws, so consuming one cannot shift another.
  Rng stream(std::string_view tag) const;

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). Rejection sampled, bias-free.
  std::size_t uniform_index(std::size_t n);

  /// Standard normal via Box-Muller. Pairs are cached.
  double normal();
  double normal(double mean, double stddev);

  /// Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape);
  double beta(double a, double b);

  /// Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  /// m distinct indices from 0..n-1 (partial Fisher-Yates). Requires m <= n.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m);

private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
  std::uint64_t seed_;
};

}  // namespace nst
