#include "mergan/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mergan {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a, used only to turn stream names into split keys.
std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t Rng::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return mix(state_);
}

Rng Rng::split(std::uint64_t key) const {
  return Rng(mix(state_ ^ mix(key + 0x632BE59BD9B4E019ULL)));
}

Rng Rng::split(std::string_view name) const { return split(hash_name(name)); }

Rng Rng::split(std::string_view name, std::uint64_t index) const {
  return split(hash_name(name)).split(index);
}

double sample_uniform01(Rng& rng) {
  return static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
}

double sample_standard_normal(Rng& rng) {
  // u1 in (0, 1] keeps the logarithm finite.
  const double u1 = static_cast<double>((rng.next() >> 11) + 1) * 0x1.0p-53;
  const double u2 = sample_uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor sample_gaussian(Rng& rng, const Shape& shape) {
  Tensor out(shape);
  for (double& v : out.values()) v = sample_standard_normal(rng);
  return out;
}

int sample_category(Rng& rng, int lo, int hi) {
  if (lo > hi) {
    throw std::invalid_argument("sample_category: empty range [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  }
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t x = rng.next();
  while (x >= limit) x = rng.next();
  return lo + static_cast<int>(x % range);
}

std::vector<int> sample_categories(Rng& rng, std::size_t count, int lo, int hi) {
  std::vector<int> out(count);
  for (int& c : out) c = sample_category(rng, lo, hi);
  return out;
}

}  // namespace mergan
