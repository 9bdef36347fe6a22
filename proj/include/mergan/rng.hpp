#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mergan/tensor.hpp"

namespace mergan {

/// Deterministic random source built on splitmix64.
///
/// The whole generator state is one 64-bit word. The algorithm is frozen:
/// changing it would change every seeded experiment in the repository.
///   next():     state += 0x9E3779B97F4A7C15, then the splitmix64 finalizer.
///   uniform01:  top 53 bits of next() scaled by 2^-53, in [0, 1).
///   gaussian:   Box-Muller cosine branch, two next() calls per value.
///   category:   rejection sampling on next(), so every value is unbiased.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next();
  std::uint64_t state() const noexcept { return state_; }

  /// Independent child stream keyed by `key`; the parent is not advanced.
  Rng split(std::uint64_t key) const;
  Rng split(std::string_view name) const;
  Rng split(std::string_view name, std::uint64_t index) const;

 private:
  std::uint64_t state_;
};

double sample_uniform01(Rng& rng);
double sample_standard_normal(Rng& rng);
Tensor sample_gaussian(Rng& rng, const Shape& shape);
/// Uniform integer in [lo, hi]. Throws std::invalid_argument when lo > hi.
int sample_category(Rng& rng, int lo, int hi);
std::vector<int> sample_categories(Rng& rng, std::size_t count, int lo, int hi);

}  // namespace mergan
