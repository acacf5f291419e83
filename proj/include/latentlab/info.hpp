#pragma once

// Exact information measures, in bits.
//
// The central quantity is the residual conditional mutual information
//   I(X_{t+1}; Z | X_<=t) = H(X_{t+1} | X_<=t) - H(X_{t+1} | X_<=t, Z)
//                         = E[ KL(p_full(.|prefix,z) || p_marg(.|prefix)) ],
// computed both ways from an exact enumeration of prefixes. In multi-regime
// worlds the hidden variable Z is the pair (k, z).

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "latentlab/channel.hpp"
#include "latentlab/csv.hpp"
#include "latentlab/exact.hpp"
#include "latentlab/model.hpp"

namespace latentlab {

inline constexpr double kInfiniteKl = std::numeric_limits<double>::infinity();

namespace detail {

inline double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return h;
}

inline double kl_bits(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ConfigError("KL divergence of distributions with different sizes");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return kInfiniteKl;
    d += p[i] * std::log2(p[i] / q[i]);
  }
  return d;
}

} // namespace detail

inline double entropy(const TokenDistribution& d) { return detail::entropy_bits(d.probs()); }

/// KL(p || q) in bits; +infinity (kInfiniteKl) when p has mass where q has none.
inline double kl_divergence(const TokenDistribution& p, const TokenDistribution& q) {
  return detail::kl_bits(p.probs(), q.probs());
}

inline double total_variation(const TokenDistribution& p, const TokenDistribution& q) {
  if (p.size() != q.size()) throw ConfigError("total variation of distributions with different sizes");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

struct CmiContribution {
  TokenSequence prefix;
  std::optional<int> symbol; ///< augmentation symbol id, when conditioning on one
  double weight = 0.0;       ///< probability of (prefix[, symbol])
  double kl_bits = 0.0;      ///< E_z|prefix KL(p_full || p_marg) at this prefix
};

struct CmiReport {
  std::size_t position = 0;
  double value_bits = 0.0;          ///< expected-KL form
  double h_cond_bits = 0.0;         ///< H(X_{t+1} | X_<=t [, R_t])
  double h_cond_latent_bits = 0.0;  ///< H(X_{t+1} | X_<=t [, R_t], Z)
  std::vector<CmiContribution> contributions;

  std::size_t prefix_count() const { return contributions.size(); }
  double entropy_difference() const { return h_cond_bits - h_cond_latent_bits; }
};

inline CsvTable cmi_table(const std::vector<CmiReport>& reports) {
  CsvTable table{{"t", "cmi_bits", "h_cond", "h_cond_latent", "n_prefixes"}, {}};
  for (const auto& r : reports)
    table.add({std::to_string(r.position), format_double(r.value_bits), format_double(r.h_cond_bits),
               format_double(r.h_cond_latent_bits), std::to_string(r.prefix_count())});
  return table;
}

namespace detail {

/// Folds one conditioning cell (a prefix, possibly with a symbol) into the
/// report. `w` holds unnormalized joint weights of (k, z) and the cell.
inline void accumulate_cell(const LatentWorld& world, const JointWeights& w,
                            const TokenSequence& prefix, std::optional<int> symbol, CmiReport& report) {
  const double cell = total_weight(w);
  if (!(cell > 0.0)) return;
  const TokenDistribution marg = blend_rows(world, w, prefix);
  double kl = 0.0;
  double h_latent = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    for (std::size_t z = 0; z < w[k].size(); ++z) {
      if (w[k][z] == 0.0) continue;
      const double post = w[k][z] / cell;
      const auto row = world.emission(k, z, prefix);
      kl += post * kl_bits(row, marg.probs());
      h_latent += post * entropy_bits(row);
    }
  report.value_bits += cell * kl;
  report.h_cond_bits += cell * entropy(marg);
  report.h_cond_latent_bits += cell * h_latent;
  report.contributions.push_back({prefix, symbol, cell, kl});
}

inline void check_position(const LatentWorld& world, std::size_t t) {
  if (t >= world.horizon())
    throw ConfigError("position " + std::to_string(t) + " has no next token (horizon " +
                      std::to_string(world.horizon()) + ")");
}

} // namespace detail

/// I(X_{t+1}; Z | X_<=t) at prefix length t.
inline CmiReport conditional_mutual_information(const LatentWorld& world, std::size_t t) {
  detail::check_position(world, t);
  CmiReport report;
  report.position = t;
  for_each_prefix(world, t, world.enumeration_budget(),
                  [&](const TokenSequence& prefix, const JointWeights& w) {
                    detail::accumulate_cell(world, w, prefix, std::nullopt, report);
                  });
  return report;
}

/// I_k(X_{t+1}; Z^(k) | X_<=t): the same quantity inside regime k.
inline CmiReport regime_cmi(const LatentWorld& world, std::size_t k, std::size_t t) {
  if (k >= world.regime_count()) throw ConfigError("regime index out of range");
  if (!(world.regime_weights()[k] > 0.0))
    throw ConfigError("regime " + std::to_string(k) + " is unreachable (weight 0)");
  return conditional_mutual_information(world.restricted_to(k), t);
}

/// I(X_{t+1}; Z | X_<=t, R_t): conditions additionally on the channel symbol
/// emitted at position t, enumerating every symbol value.
inline CmiReport augmented_cmi(const LatentWorld& world, const AugmentationChannel& channel,
                               std::size_t t) {
  detail::check_position(world, t);
  CmiReport report;
  report.position = t;
  for_each_prefix(world, t, world.enumeration_budget(),
                  [&](const TokenSequence& prefix, const JointWeights& w) {
                    for (std::size_t s = 0; s < channel.symbol_count(); ++s) {
                      JointWeights ws = w;
                      for (std::size_t k = 0; k < ws.size(); ++k)
                        for (std::size_t z = 0; z < ws[k].size(); ++z)
                          ws[k][z] *= channel.readout(k, z, prefix)[s];
                      detail::accumulate_cell(world, ws, prefix, channel.symbol_id(s), report);
                    }
                  });
  return report;
}

/// E_prefix KL(p_marg(.|prefix) || p_theta(.|prefix)) at prefix length t.
/// +infinity when the model is unsupported anywhere the world has mass.
inline double expected_model_kl(const LatentWorld& world, const TabularModel& model, std::size_t t) {
  detail::check_position(world, t);
  double total = 0.0;
  bool infinite = false;
  for_each_prefix(world, t, world.enumeration_budget(),
                  [&](const TokenSequence& prefix, const JointWeights& w) {
                    if (infinite) return;
                    const TokenDistribution marg = blend_rows(world, w, prefix);
                    try {
                      const double kl = kl_divergence(marg, model_conditional(model, prefix));
                      if (std::isinf(kl)) infinite = true;
                      total += total_weight(w) * kl;
                    } catch (const UnsupportedContextError&) {
                      infinite = true;
                    }
                  });
  return infinite ? kInfiniteKl : total;
}

/// E_(prefix,k,z) KL(p_full || p_theta): the model's log-loss regret against
/// the full conditional. Equals CMI + expected_model_kl.
inline double expected_full_kl(const LatentWorld& world, const TabularModel& model, std::size_t t) {
  detail::check_position(world, t);
  double total = 0.0;
  bool infinite = false;
  for_each_prefix(world, t, world.enumeration_budget(),
                  [&](const TokenSequence& prefix, const JointWeights& w) {
                    if (infinite) return;
                    try {
                      const TokenDistribution q = model_conditional(model, prefix);
                      for (std::size_t k = 0; k < w.size(); ++k)
                        for (std::size_t z = 0; z < w[k].size(); ++z) {
                          if (w[k][z] == 0.0) continue;
                          const double kl = detail::kl_bits(world.emission(k, z, prefix), q.probs());
                          if (std::isinf(kl)) infinite = true;
                          total += w[k][z] * kl;
                        }
                    } catch (const UnsupportedContextError&) {
                      infinite = true;
                    }
                  });
  return infinite ? kInfiniteKl : total;
}

/// E_(prefix,s,k,z) KL(p_full || p_theta(.|prefix, s)) where s is the channel
/// symbol; the model is queried with the symbol in its context key.
inline double expected_augmented_model_kl(const LatentWorld& world, const AugmentationChannel& channel,
                                          const TabularModel& model, std::size_t t) {
  detail::check_position(world, t);
  double total = 0.0;
  bool infinite = false;
  for_each_prefix(world, t, world.enumeration_budget(),
                  [&](const TokenSequence& prefix, const JointWeights& w) {
                    for (std::size_t s = 0; s < channel.symbol_count() && !infinite; ++s) {
                      double cell = 0.0;
                      for (std::size_t k = 0; k < w.size(); ++k)
                        for (std::size_t z = 0; z < w[k].size(); ++z)
                          cell += w[k][z] * channel.readout(k, z, prefix)[s];
                      if (cell == 0.0) continue;
                      try {
                        const TokenDistribution q = model_conditional(model, prefix, channel.symbol_id(s));
                        for (std::size_t k = 0; k < w.size(); ++k)
                          for (std::size_t z = 0; z < w[k].size(); ++z) {
                            const double joint = w[k][z] * channel.readout(k, z, prefix)[s];
                            if (joint == 0.0) continue;
                            const double kl = detail::kl_bits(world.emission(k, z, prefix), q.probs());
                            if (std::isinf(kl)) infinite = true;
                            total += joint * kl;
                          }
                      } catch (const UnsupportedContextError&) {
                        infinite = true;
                      }
                    }
                  });
  return infinite ? kInfiniteKl : total;
}

/// Unweighted mean of a per-position quantity over t = 0..horizon-1. A
/// sequence-level summary; the criteria themselves are per position.
template <typename PerPosition>
double mean_over_positions(const LatentWorld& world, PerPosition&& f) {
  double sum = 0.0;
  for (std::size_t t = 0; t < world.horizon(); ++t) sum += f(t);
  return sum / static_cast<double>(world.horizon());
}

} // namespace latentlab
