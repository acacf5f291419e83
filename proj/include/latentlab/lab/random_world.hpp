#pragma once

#include <algorithm>

#include "latentlab/process.hpp"
#include "latentlab/random.hpp"

namespace latentlab::worlds {

struct RandomWorldLimits {
  std::size_t max_vocab = 4;
  std::size_t max_horizon = 6;
  std::size_t max_latent = 3;
  std::size_t max_regimes = 3;
  std::size_t max_order = 2;
  /// Chance that an individual emission entry is forced to zero.
  double sparsity = 0.25;
};

namespace detail {

inline std::size_t draw_between(std::size_t lo, std::size_t hi, Rng& rng) {
  return lo + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
}

/// Random probability vector; entries are zeroed with probability `sparsity`
/// but at least one stays positive.
inline std::vector<double> random_row(std::size_t n, double sparsity, Rng& rng) {
  std::vector<double> w(n);
  for (double& v : w) v = uniform01(rng) < sparsity ? 0.0 : 0.05 + uniform01(rng);
  if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; }))
    w[draw_between(0, n - 1, rng)] = 1.0;
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

} // namespace detail

/// A small world with random sizes within `limits` and an explicit emission
/// row for every (z, reachable context).
inline WorldSpec random_world_spec(Rng& rng, const RandomWorldLimits& limits = {}) {
  WorldSpec spec;
  spec.name = "random";
  spec.vocab_size = detail::draw_between(2, limits.max_vocab, rng);
  spec.horizon = detail::draw_between(1, limits.max_horizon, rng);
  spec.context_order = detail::draw_between(0, limits.max_order, rng);
  const std::size_t K = detail::draw_between(1, limits.max_regimes, rng);
  spec.regime_weights = detail::random_row(K, 0.0, rng);

  // Reachable contexts, via a throwaway world with the right shape.
  WorldSpec shape = spec;
  shape.regime_weights = {1.0};
  shape.regimes = {{{1.0}, {{std::nullopt, std::nullopt, std::vector<double>(spec.vocab_size, 1.0 / spec.vocab_size)}}}};
  const auto contexts = build_world(shape).reachable_contexts();

  for (std::size_t k = 0; k < K; ++k) {
    RegimeSpec rs;
    const std::size_t Z = detail::draw_between(1, limits.max_latent, rng);
    rs.latent_prior = detail::random_row(Z, 0.0, rng);
    for (std::size_t z = 0; z < Z; ++z)
      for (const auto& ctx : contexts)
        rs.emission.push_back({z, ctx, detail::random_row(spec.vocab_size, limits.sparsity, rng)});
    spec.regimes.push_back(std::move(rs));
  }
  return spec;
}

} // namespace latentlab::worlds
