#pragma once

// Exact Bayesian filtering over (regime, latent) and the reference
// conditionals derived from it: p(z, k | prefix), p_marg, p(k | prefix),
// p_k, and the mixture conditional. Everything is a finite sum.

#include <functional>
#include <numeric>
#include <ostream>
#include <vector>

#include "latentlab/csv.hpp"
#include "latentlab/process.hpp"

namespace latentlab {

/// Posterior over (regime k, latent z) given a prefix; joint[k][z].
struct FilterPosterior {
  std::vector<std::vector<double>> joint;

  std::vector<double> regime_marginal() const {
    std::vector<double> out;
    out.reserve(joint.size());
    for (const auto& row : joint) out.push_back(std::accumulate(row.begin(), row.end(), 0.0));
    return out;
  }
};

/// Unnormalized forward weights pi_k prior_k(z) prod_t p_k(x_{t+1} | ctx, z),
/// stored as joint[k][z].
using JointWeights = std::vector<std::vector<double>>;

inline JointWeights prior_weights(const LatentWorld& world) {
  JointWeights w(world.regime_count());
  for (std::size_t k = 0; k < world.regime_count(); ++k) {
    const auto& prior = world.regime(k).latent_prior();
    w[k].resize(prior.size());
    for (std::size_t z = 0; z < prior.size(); ++z) w[k][z] = world.regime_weights()[k] * prior[z];
  }
  return w;
}

inline double total_weight(const JointWeights& w) {
  double s = 0.0;
  for (const auto& row : w)
    for (double v : row) s += v;
  return s;
}

/// Multiplies in the likelihood of `next` following `prefix`.
inline void absorb_token(const LatentWorld& world, JointWeights& w, std::span<const Token> prefix,
                         Token next) {
  for (std::size_t k = 0; k < w.size(); ++k)
    for (std::size_t z = 0; z < w[k].size(); ++z)
      w[k][z] *= world.emission(k, z, prefix)[static_cast<std::size_t>(next)];
}

inline JointWeights forward_weights(const LatentWorld& world, std::span<const Token> prefix) {
  JointWeights w = prior_weights(world);
  for (std::size_t t = 0; t < prefix.size(); ++t) absorb_token(world, w, prefix.first(t), prefix[t]);
  return w;
}

inline FilterPosterior normalize(const JointWeights& w, std::span<const Token> prefix) {
  const double total = total_weight(w);
  if (!(total > 0.0))
    throw ZeroSupportError("prefix " + format_context(prefix) + " has probability zero");
  FilterPosterior post{w};
  for (auto& row : post.joint)
    for (double& v : row) v /= total;
  return post;
}

/// Exact p(k, z | prefix).
inline FilterPosterior filter_posterior(const LatentWorld& world, std::span<const Token> prefix) {
  world.check_prefix(prefix, world.horizon());
  return normalize(forward_weights(world, prefix), prefix);
}

/// Token-by-token forward filter. Keeps the posterior normalized and
/// accumulates the prefix probability as a product of one-step predictives.
class FilterState {
public:
  explicit FilterState(const LatentWorld& world)
      : world_(&world), posterior_{prior_weights(world)} {}

  void observe(Token next) {
    if (!world_->valid_token(next)) throw ConfigError("token outside vocabulary");
    if (prefix_.size() >= world_->horizon()) throw ConfigError("prefix would exceed the horizon");
    JointWeights w = posterior_.joint;
    absorb_token(*world_, w, prefix_, next);
    const double step = total_weight(w);
    prefix_.push_back(next);
    posterior_ = normalize(w, prefix_);
    probability_ *= step;
  }

  const FilterPosterior& posterior() const { return posterior_; }
  const TokenSequence& prefix() const { return prefix_; }
  double prefix_probability() const { return probability_; }

private:
  const LatentWorld* world_;
  FilterPosterior posterior_;
  TokenSequence prefix_;
  double probability_ = 1.0;
};

inline std::vector<double> regime_posterior(const LatentWorld& world, std::span<const Token> prefix) {
  return filter_posterior(world, prefix).regime_marginal();
}

/// Sum_k,z weight[k][z] * p_k(. | prefix, z), normalized.
inline TokenDistribution blend_rows(const LatentWorld& world, const JointWeights& w,
                                    std::span<const Token> prefix) {
  std::vector<double> out(world.vocab_size(), 0.0);
  for (std::size_t k = 0; k < w.size(); ++k)
    for (std::size_t z = 0; z < w[k].size(); ++z) {
      if (w[k][z] == 0.0) continue;
      const auto row = world.emission(k, z, prefix);
      for (std::size_t v = 0; v < out.size(); ++v) out[v] += w[k][z] * row[v];
    }
  return TokenDistribution::from_weights(std::move(out));
}

/// p_marg(. | prefix): p_full averaged over the exact posterior of (k, z).
inline TokenDistribution marginal_conditional(const LatentWorld& world, std::span<const Token> prefix) {
  world.check_prefix(prefix, world.horizon() - 1);
  return blend_rows(world, filter_posterior(world, prefix).joint, prefix);
}

/// p_k(. | prefix): within-regime marginalization over z.
inline TokenDistribution regime_conditional(const LatentWorld& world, std::size_t k,
                                            std::span<const Token> prefix) {
  if (k >= world.regime_count()) throw ConfigError("regime index out of range");
  world.check_prefix(prefix, world.horizon() - 1);
  JointWeights w(world.regime_count());
  w[k].assign(world.regime(k).latent_size(), 0.0);
  const auto& prior = world.regime(k).latent_prior();
  for (std::size_t z = 0; z < prior.size(); ++z) w[k][z] = prior[z];
  for (std::size_t t = 0; t < prefix.size(); ++t) absorb_token(world, w, prefix.first(t), prefix[t]);
  if (!(total_weight(w) > 0.0))
    throw ZeroSupportError("prefix " + format_context(prefix) + " is unsupported in regime " +
                           std::to_string(k));
  return blend_rows(world, w, prefix);
}

/// Sum_k p(k | prefix) p_k(. | prefix), skipping regimes that cannot produce the prefix.
inline TokenDistribution mixture_conditional(const LatentWorld& world, std::span<const Token> prefix) {
  const auto regime_post = regime_posterior(world, prefix);
  world.check_prefix(prefix, world.horizon() - 1);
  std::vector<double> out(world.vocab_size(), 0.0);
  for (std::size_t k = 0; k < world.regime_count(); ++k) {
    if (regime_post[k] == 0.0) continue;
    const auto local = regime_conditional(world, k, prefix);
    for (std::size_t v = 0; v < out.size(); ++v) out[v] += regime_post[k] * local[v];
  }
  return TokenDistribution::from_weights(std::move(out));
}

struct PrefixEntry {
  TokenSequence prefix;
  double probability = 0.0;
};

/// All positive-probability prefixes of one length with their exact probabilities.
struct PrefixEnsemble {
  std::size_t length = 0;
  std::vector<PrefixEntry> entries;

  void write_csv(std::ostream& os) const {
    CsvTable table{{"prefix", "probability"}, {}};
    for (const auto& e : entries) table.add({format_tokens(e.prefix), format_double(e.probability)});
    table.write(os);
  }
};

inline void check_enumeration_budget(const LatentWorld& world, std::size_t length,
                                     std::uint64_t budget) {
  const std::uint64_t paths = LatentWorld::saturating_power(world.vocab_size(), length);
  if (paths > budget)
    throw BudgetExceededError("enumerating length-" + std::to_string(length) + " prefixes needs " +
                              std::to_string(paths) + " paths, budget is " + std::to_string(budget));
}

/// Depth-first walk over every positive-probability prefix of `length`, in
/// lexicographic order, handing the visitor the prefix and its unnormalized
/// forward weights (which sum to the prefix probability).
inline void for_each_prefix(const LatentWorld& world, std::size_t length, std::uint64_t budget,
                            const std::function<void(const TokenSequence&, const JointWeights&)>& visit) {
  if (length > world.horizon()) throw ConfigError("prefix length exceeds the horizon");
  check_enumeration_budget(world, length, budget);
  TokenSequence prefix;
  prefix.reserve(length);
  std::function<void(const JointWeights&)> walk = [&](const JointWeights& w) {
    if (prefix.size() == length) {
      visit(prefix, w);
      return;
    }
    for (std::size_t v = 0; v < world.vocab_size(); ++v) {
      JointWeights next = w;
      absorb_token(world, next, prefix, static_cast<Token>(v));
      if (!(total_weight(next) > 0.0)) continue;
      prefix.push_back(static_cast<Token>(v));
      walk(next);
      prefix.pop_back();
    }
  };
  walk(prior_weights(world));
}

inline PrefixEnsemble enumerate_prefixes(const LatentWorld& world, std::size_t length,
                                         std::uint64_t budget) {
  PrefixEnsemble ens;
  ens.length = length;
  for_each_prefix(world, length, budget, [&](const TokenSequence& p, const JointWeights& w) {
    ens.entries.push_back({p, total_weight(w)});
  });
  return ens;
}

inline PrefixEnsemble enumerate_prefixes(const LatentWorld& world, std::size_t length) {
  return enumerate_prefixes(world, length, world.enumeration_budget());
}

} // namespace latentlab
