#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "redeval/errors.hpp"

namespace redeval {

// FNV-1a 64-bit. Fully specified by published constants, so the value is
// identical on every platform and in every language.
constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t stable_hash64(std::string_view bytes) {
  std::uint64_t hash = kFnvOffsetBasis;
  for (unsigned char byte : bytes) {
    hash ^= static_cast<std::uint64_t>(byte);
    hash *= kFnvPrime;
  }
  return hash;
}

// SplitMix64 generator (Steele, Lea, Flood 2014 constants).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) from the top 53 bits.
  double next_unit() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Per-component, per-sample seed stream rooted at the experiment seed.
inline std::uint64_t derive_seed(std::uint64_t root_seed,
                                 std::string_view component_name,
                                 std::string_view sample_id) {
  if (component_name.empty() || sample_id.empty()) {
    throw FrameworkError(ErrorKind::Validation,
                         "derive_seed: component_name and sample_id must be non-empty");
  }
  std::string key;
  key.reserve(component_name.size() + 1 + sample_id.size());
  key.append(component_name);
  key.push_back(':');
  key.append(sample_id);
  SplitMix64 rng(root_seed ^ stable_hash64(key));
  return rng.next();
}

}  // namespace redeval
