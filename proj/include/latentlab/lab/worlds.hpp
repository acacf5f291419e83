#pragma once

// Built-in worlds used by the scenario library and the test suites.

#include <cmath>
#include <string>
#include <vector>

#include "latentlab/process.hpp"

namespace latentlab::worlds {

namespace detail {

inline EmissionRule rule(std::optional<std::size_t> z, std::optional<TokenSequence> ctx, std::vector<double> row) {
  return {z, std::move(ctx), std::move(row)};
}

} // namespace detail

/// Every conditional is uniform over V tokens.
inline WorldSpec uniform_spec(std::size_t vocab = 2, std::size_t horizon = 3, std::size_t order = 1) {
  WorldSpec s;
  s.name = "uniform";
  s.vocab_size = vocab;
  s.horizon = horizon;
  s.context_order = order;
  s.regime_weights = {1.0};
  s.regimes = {{{1.0}, {detail::rule(std::nullopt, std::nullopt, std::vector<double>(vocab, 1.0 / vocab))}}};
  return s;
}

/// z uniform over {0, 1}; every token equals z with probability `fidelity`.
/// fidelity = 1 is the deterministic X_{t+1} = z world.
inline WorldSpec insufficient_spec(double fidelity = 1.0, std::size_t horizon = 3) {
  WorldSpec s;
  s.name = fidelity == 1.0 ? "insufficient" : "insufficient-noisy";
  s.vocab_size = 2;
  s.horizon = horizon;
  s.context_order = 1;
  s.regime_weights = {1.0};
  s.regimes = {{{0.5, 0.5},
                {detail::rule(0, std::nullopt, {fidelity, 1.0 - fidelity}),
                 detail::rule(1, std::nullopt, {1.0 - fidelity, fidelity})}}};
  return s;
}

/// Same shape as the insufficient world, but emissions ignore z.
inline WorldSpec independent_spec(std::size_t horizon = 3) {
  WorldSpec s = insufficient_spec(1.0, horizon);
  s.name = "independent";
  s.regimes[0].emission = {detail::rule(std::nullopt, std::nullopt, {0.7, 0.3})};
  return s;
}

/// Two regimes. In regime 0 the first token spells out z, after which the
/// prefix is a sufficient statistic; in regime 1 the first token is always 2
/// and z only leaks through noisy emissions.
inline WorldSpec sufficient_island_spec() {
  WorldSpec s;
  s.name = "sufficient-island";
  s.vocab_size = 3;
  s.horizon = 4;
  s.context_order = 1;
  s.regime_weights = {0.5, 0.5};
  s.regimes = {
      {{0.5, 0.5},
       {detail::rule(0, TokenSequence{kBos}, {1.0, 0.0, 0.0}), detail::rule(1, TokenSequence{kBos}, {0.0, 1.0, 0.0}),
        detail::rule(0, std::nullopt, {0.7, 0.3, 0.0}), detail::rule(1, std::nullopt, {0.3, 0.7, 0.0})}},
      {{0.5, 0.5},
       {detail::rule(0, TokenSequence{kBos}, {0.0, 0.0, 1.0}), detail::rule(1, TokenSequence{kBos}, {0.0, 0.0, 1.0}),
        detail::rule(0, std::nullopt, {0.8, 0.2, 0.0}),
        detail::rule(1, std::nullopt, {0.2, 0.8, 0.0})}},
  };
  return s;
}

/// Regimes with disjoint token supports: one token identifies the regime.
inline WorldSpec mixture_identifiable_spec() {
  WorldSpec s;
  s.name = "mixture-identifiable";
  s.vocab_size = 4;
  s.horizon = 3;
  s.context_order = 1;
  s.regime_weights = {0.5, 0.5};
  s.regimes = {{{1.0}, {detail::rule(std::nullopt, std::nullopt, {0.6, 0.4, 0.0, 0.0})}},
               {{1.0}, {detail::rule(std::nullopt, std::nullopt, {0.0, 0.0, 0.3, 0.7})}}};
  return s;
}

/// Regimes with heavily overlapping emissions: short prefixes barely move the
/// regime posterior.
inline WorldSpec mixture_confusable_spec() {
  WorldSpec s;
  s.name = "mixture-confusable";
  s.vocab_size = 2;
  s.horizon = 3;
  s.context_order = 1;
  s.regime_weights = {0.5, 0.5};
  s.regimes = {{{1.0}, {detail::rule(std::nullopt, std::nullopt, {0.55, 0.45})}},
               {{1.0}, {detail::rule(std::nullopt, std::nullopt, {0.45, 0.55})}}};
  return s;
}

/// Persistent noisy latent: z in {0, 1}, each token equals z with probability 0.8.
/// Stationary across sequences; CMI is positive at every position.
inline WorldSpec noisy_latent_spec(std::size_t horizon = 4) {
  WorldSpec s = insufficient_spec(0.8, horizon);
  s.name = "noisy-latent";
  return s;
}

/// A single-phase i.i.d. world emitting token 0 with probability p0.
inline WorldSpec phase_spec(double p0, std::size_t horizon = 4) {
  WorldSpec s;
  s.name = "phase";
  s.vocab_size = 2;
  s.horizon = horizon;
  s.context_order = 0;
  s.regime_weights = {1.0};
  s.regimes = {{{1.0}, {detail::rule(std::nullopt, std::nullopt, {p0, 1.0 - p0})}}};
  return s;
}

/// The even blend of two phases: what a model fit on their concatenation sees.
inline WorldSpec blend_spec(double p0_a, double p0_b, std::size_t horizon = 4) {
  WorldSpec s = phase_spec(p0_a, horizon);
  s.name = "blend";
  s.regime_weights = {0.5, 0.5};
  s.regimes.push_back(phase_spec(p0_b, horizon).regimes[0]);
  return s;
}

/// Three tokens with thin tails (2-5% transitions) and a binary latent.
inline WorldSpec collapse_spec() {
  WorldSpec s;
  s.name = "collapse";
  s.vocab_size = 3;
  s.horizon = 4;
  s.context_order = 1;
  s.regime_weights = {1.0};
  s.regimes = {{{0.6, 0.4},
                {detail::rule(0, TokenSequence{kBos}, {0.75, 0.20, 0.05}),
                 detail::rule(0, TokenSequence{0}, {0.70, 0.27, 0.03}),
                 detail::rule(0, TokenSequence{1}, {0.40, 0.58, 0.02}),
                 detail::rule(0, TokenSequence{2}, {0.50, 0.45, 0.05}),
                 detail::rule(1, TokenSequence{kBos}, {0.20, 0.75, 0.05}),
                 detail::rule(1, TokenSequence{0}, {0.55, 0.43, 0.02}),
                 detail::rule(1, TokenSequence{1}, {0.25, 0.70, 0.05}),
                 detail::rule(1, TokenSequence{2}, {0.45, 0.50, 0.05})}}};
  return s;
}

} // namespace latentlab::worlds
