#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace latentlab {

/// Every stochastic operation takes one of these explicitly.
using Rng = std::mt19937_64;

// The standard distributions are implementation-defined; these two draws are
// specified bit-for-bit so corpora are identical across standard libraries.

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Inverse-CDF draw from non-negative weights summing to (about) one.
/// Never returns an index whose weight is zero.
inline std::size_t draw_index(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

/// Independent stream seed for (base, stream), via the splitmix64 finalizer.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace latentlab
