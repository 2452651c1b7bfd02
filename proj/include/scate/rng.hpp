#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace scate {

std::uint64_t splitmix64(std::uint64_t& state);

// Combines a base seed with stream identifiers (tree index, cell index, ...) into an
// independent seed. Order of the identifiers matters.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

// xoshiro256** seeded through splitmix64. The output stream is fully specified, so
// results are identical across platforms and standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  void shuffle(std::vector<int>& v);
  std::vector<int> permutation(int n);
  // k distinct values from [0, n) in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace scate
