#pragma once

// Finite latent-circumstance language processes: the ground-truth worlds.
//
// A world is a mixture over regimes k with weights pi_k. A sequence draws its
// regime, then a latent circumstance z from that regime's prior (held fixed
// for the whole sequence), then emits tokens x_1..x_T where x_{t+1} depends on
// z and the last m tokens. Positions before m are padded with kBos.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "latentlab/distribution.hpp"
#include "latentlab/errors.hpp"
#include "latentlab/random.hpp"

namespace latentlab {

/// Begin-of-sequence padding token. Never a real token.
inline constexpr Token kBos = -1;

inline constexpr std::uint64_t kDefaultEnumerationBudget = std::uint64_t{1} << 20;
inline constexpr std::uint64_t kMaxContextTableSize = std::uint64_t{1} << 20;

inline std::string format_context(std::span<const Token> context) {
  std::string out = "[";
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i) out += ',';
    out += context[i] == kBos ? std::string("^") : std::to_string(context[i]);
  }
  return out + "]";
}

/// Last `order` tokens of `prefix`, left-padded with kBos.
inline TokenSequence context_window(std::span<const Token> prefix, std::size_t order) {
  TokenSequence ctx(order, kBos);
  const std::size_t take = std::min(order, prefix.size());
  std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(),
            ctx.end() - static_cast<std::ptrdiff_t>(take));
  return ctx;
}

/// One emission table entry. An empty optional is a wildcard.
struct EmissionRule {
  std::optional<std::size_t> latent;
  std::optional<TokenSequence> context;
  std::vector<double> row;
};

struct RegimeSpec {
  std::vector<double> latent_prior;
  std::vector<EmissionRule> emission;
};

/// Declarative world description, usually parsed from a world file.
///
/// Emission lookup for (z, context) takes the first matching rule in the
/// order (z, context), (z, *), (*, context), (*, *).
struct WorldSpec {
  std::string name;
  std::size_t vocab_size = 0;
  std::size_t horizon = 0;
  std::size_t context_order = 2;
  std::vector<double> regime_weights;
  std::vector<RegimeSpec> regimes;
  std::uint64_t enumeration_budget = kDefaultEnumerationBudget;
};

class LatentWorld;

/// A mixture component: latent prior plus emission table indexed by (z, context).
class Regime {
public:
  std::size_t latent_size() const { return latent_prior_.size(); }
  const TokenDistribution& latent_prior() const { return latent_prior_; }

private:
  friend class LatentWorld;
  friend LatentWorld build_world(const WorldSpec&);

  TokenDistribution latent_prior_;
  // Flat [z][context index][token].
  std::vector<double> emission_;
};

/// Validated, immutable world.
class LatentWorld {
public:
  const std::string& name() const { return name_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t context_order() const { return context_order_; }
  std::size_t regime_count() const { return regimes_.size(); }
  const TokenDistribution& regime_weights() const { return regime_weights_; }
  const Regime& regime(std::size_t k) const { return regimes_.at(k); }
  std::uint64_t enumeration_budget() const { return budget_; }

  /// Number of complete token paths, V^horizon (saturating).
  std::uint64_t path_count() const { return saturating_power(vocab_size_, horizon_); }

  /// Set when V^horizon exceeds the enumeration budget. Exact operations at
  /// the full horizon will refuse to run.
  bool exceeds_budget() const { return path_count() > budget_; }

  /// Emission row p_k(. | context(prefix), z) as a view into the table.
  std::span<const double> emission(std::size_t k, std::size_t z,
                                   std::span<const Token> prefix) const {
    const Regime& r = regimes_[k];
    const std::size_t offset = (z * context_count_ + context_index(prefix)) * vocab_size_;
    return std::span<const double>(r.emission_).subspan(offset, vocab_size_);
  }

  /// Index of the context formed by the last m tokens of prefix.
  std::size_t context_index(std::span<const Token> prefix) const {
    std::size_t index = 0;
    const std::size_t base = vocab_size_ + 1;
    for (std::size_t i = 0; i < context_order_; ++i) {
      const std::size_t back = context_order_ - i;
      const Token tok = back <= prefix.size() ? prefix[prefix.size() - back] : kBos;
      index = index * base + (tok == kBos ? vocab_size_ : static_cast<std::size_t>(tok));
    }
    return index;
  }

  bool valid_token(Token t) const {
    return t >= 0 && static_cast<std::size_t>(t) < vocab_size_;
  }

  void check_prefix(std::span<const Token> prefix, std::size_t max_length) const {
    if (prefix.size() > max_length)
      throw ConfigError("prefix length " + std::to_string(prefix.size()) + " exceeds " +
                        std::to_string(max_length));
    for (Token t : prefix)
      if (!valid_token(t))
        throw ConfigError("token " + std::to_string(t) + " outside vocabulary of size " +
                          std::to_string(vocab_size_));
  }

  /// The world conditioned on regime k (a single-regime world).
  LatentWorld restricted_to(std::size_t k) const {
    if (k >= regimes_.size()) throw ConfigError("regime index out of range");
    LatentWorld w = *this;
    w.regimes_ = {regimes_[k]};
    w.regime_weights_ = TokenDistribution::point_mass(1, 0);
    w.name_ = name_ + "|regime" + std::to_string(k);
    return w;
  }

  /// Contexts (as token windows) that can occur at positions 0..horizon-1.
  std::vector<TokenSequence> reachable_contexts() const {
    std::vector<TokenSequence> out;
    const std::size_t max_pad = context_order_;
    const std::size_t min_pad =
        context_order_ + 1 > horizon_ ? context_order_ + 1 - horizon_ : 0;
    for (std::size_t pad = max_pad + 1; pad-- > min_pad;) {
      const std::size_t free = context_order_ - pad;
      TokenSequence ctx(context_order_, kBos);
      const std::uint64_t n = saturating_power(vocab_size_, free);
      for (std::uint64_t code = 0; code < n; ++code) {
        std::uint64_t c = code;
        for (std::size_t i = context_order_; i-- > pad;) {
          ctx[i] = static_cast<Token>(c % vocab_size_);
          c /= vocab_size_;
        }
        out.push_back(ctx);
      }
    }
    return out;
  }

  static std::uint64_t saturating_power(std::uint64_t base, std::size_t exp) {
    std::uint64_t result = 1;
    for (std::size_t i = 0; i < exp; ++i) {
      if (base != 0 && result > UINT64_MAX / base) return UINT64_MAX;
      result *= base;
    }
    return result;
  }

private:
  friend LatentWorld build_world(const WorldSpec&);

  std::string name_;
  std::size_t vocab_size_ = 0;
  std::size_t horizon_ = 0;
  std::size_t context_order_ = 0;
  std::size_t context_count_ = 0;
  std::uint64_t budget_ = kDefaultEnumerationBudget;
  TokenDistribution regime_weights_;
  std::vector<Regime> regimes_;
};

namespace detail {

inline void check_probability_vector(const std::vector<double>& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " is empty");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(what + " has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kNormTolerance) {
    std::ostringstream os;
    os << what << " sums to " << total << ", not 1";
    throw ConfigError(os.str());
  }
}

inline bool rule_matches(const EmissionRule& rule, std::size_t z, const TokenSequence& ctx,
                         bool want_latent, bool want_context) {
  if (rule.latent.has_value() != want_latent) return false;
  if (rule.context.has_value() != want_context) return false;
  if (want_latent && *rule.latent != z) return false;
  if (want_context && *rule.context != ctx) return false;
  return true;
}

} // namespace detail

/// Validates a spec and materializes the dense emission tables.
inline LatentWorld build_world(const WorldSpec& spec) {
  if (spec.vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (spec.horizon < 1) throw ConfigError("horizon must be at least 1");
  if (spec.regimes.empty()) throw ConfigError("world needs at least one regime");
  if (spec.regime_weights.size() != spec.regimes.size())
    throw ConfigError("regime_weights has " + std::to_string(spec.regime_weights.size()) +
                      " entries for " + std::to_string(spec.regimes.size()) + " regimes");
  detail::check_probability_vector(spec.regime_weights, "regime_weights");

  const std::uint64_t context_count =
      LatentWorld::saturating_power(spec.vocab_size + 1, spec.context_order);
  if (context_count > kMaxContextTableSize)
    throw ConfigError("context table (V+1)^m is too large to materialize");

  LatentWorld world;
  world.name_ = spec.name;
  world.vocab_size_ = spec.vocab_size;
  world.horizon_ = spec.horizon;
  world.context_order_ = spec.context_order;
  world.context_count_ = static_cast<std::size_t>(context_count);
  world.budget_ = spec.enumeration_budget;
  world.regime_weights_ = TokenDistribution(spec.regime_weights);

  const auto reachable = world.reachable_contexts();
  const std::size_t V = spec.vocab_size;

  for (std::size_t k = 0; k < spec.regimes.size(); ++k) {
    const RegimeSpec& rs = spec.regimes[k];
    const std::string where = "regime " + std::to_string(k);
    detail::check_probability_vector(rs.latent_prior, where + " latent_prior");
    const std::size_t Z = rs.latent_prior.size();

    for (const EmissionRule& rule : rs.emission) {
      if (rule.row.size() != V)
        throw ConfigError(where + ": emission row has " + std::to_string(rule.row.size()) +
                          " entries, vocabulary has " + std::to_string(V));
      if (rule.latent && *rule.latent >= Z)
        throw ConfigError(where + ": emission rule for latent " + std::to_string(*rule.latent) +
                          " but latent space has size " + std::to_string(Z));
      if (rule.context) {
        const TokenSequence& c = *rule.context;
        if (c.size() != spec.context_order)
          throw ConfigError(where + ": context " + format_context(c) + " has length " +
                            std::to_string(c.size()) + ", context_order is " +
                            std::to_string(spec.context_order));
        if (std::find(reachable.begin(), reachable.end(), c) == reachable.end())
          throw ConfigError(where + ": context " + format_context(c) +
                            " is malformed or unreachable within the horizon");
      }
      const std::string row_where =
          where + ", z " + (rule.latent ? std::to_string(*rule.latent) : std::string("*")) +
          ", context " + (rule.context ? format_context(*rule.context) : std::string("*"));
      detail::check_probability_vector(rule.row, row_where + ": emission row");
    }

    Regime regime;
    regime.latent_prior_ = TokenDistribution(rs.latent_prior);
    // Unreachable contexts keep a uniform row; they are never read.
    regime.emission_.assign(Z * world.context_count_ * V, 1.0 / static_cast<double>(V));
    for (std::size_t z = 0; z < Z; ++z) {
      for (const TokenSequence& ctx : reachable) {
        const EmissionRule* chosen = nullptr;
        for (auto [want_z, want_c] : {std::pair{true, true}, {true, false}, {false, true}, {false, false}}) {
          for (const EmissionRule& rule : rs.emission)
            if (detail::rule_matches(rule, z, ctx, want_z, want_c)) {
              chosen = &rule;
              break;
            }
          if (chosen) break;
        }
        if (!chosen)
          throw ConfigError(where + ": no emission row for z " + std::to_string(z) + ", context " +
                            format_context(ctx));
        const double total = std::accumulate(chosen->row.begin(), chosen->row.end(), 0.0);
        const std::size_t offset = (z * world.context_count_ + world.context_index(ctx)) * V;
        for (std::size_t v = 0; v < V; ++v) regime.emission_[offset + v] = chosen->row[v] / total;
      }
    }
    world.regimes_.push_back(std::move(regime));
  }
  return world;
}

/// Exact lookup of p_full(. | prefix, z) within regime k.
inline TokenDistribution full_conditional(const LatentWorld& world, std::size_t k, std::size_t z,
                                          std::span<const Token> prefix) {
  if (k >= world.regime_count()) throw ConfigError("regime index out of range");
  if (z >= world.regime(k).latent_size()) throw ConfigError("latent index out of range");
  world.check_prefix(prefix, world.horizon() - 1);
  const auto row = world.emission(k, z, prefix);
  return TokenDistribution(std::vector<double>(row.begin(), row.end()));
}

struct SequenceSample {
  TokenSequence tokens;
  std::size_t regime_index = 0; ///< oracle-only
  std::size_t latent_value = 0; ///< oracle-only
};

struct Corpus {
  std::vector<SequenceSample> samples;
  /// Whether oracle-side consumers may read regime/latent fields. Training never does.
  bool latent_visible = false;

  std::size_t size() const { return samples.size(); }

  /// Total number of (prefix, next token) training pairs, N.
  std::size_t transitions() const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.tokens.size();
    return n;
  }

  /// FNV-1a over the token streams only; identifies the training data.
  std::string id() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& s : samples) {
      mix(s.tokens.size());
      for (Token t : s.tokens) mix(static_cast<std::uint64_t>(t));
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }
};

inline SequenceSample sample_sequence(const LatentWorld& world, Rng& rng) {
  SequenceSample s;
  s.regime_index = draw_index(world.regime_weights().probs(), rng);
  const Regime& regime = world.regime(s.regime_index);
  s.latent_value = draw_index(regime.latent_prior().probs(), rng);
  s.tokens.reserve(world.horizon());
  for (std::size_t t = 0; t < world.horizon(); ++t) {
    const auto row = world.emission(s.regime_index, s.latent_value, s.tokens);
    s.tokens.push_back(static_cast<Token>(draw_index(row, rng)));
  }
  return s;
}

inline Corpus sample_corpus(const LatentWorld& world, std::size_t count, Rng& rng) {
  if (count == 0) throw ConfigError("corpus must contain at least one sequence");
  Corpus c;
  c.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) c.samples.push_back(sample_sequence(world, rng));
  return c;
}

/// Sequences of `b` appended after those of `a` (a non-stationary archive).
inline Corpus concatenate(const Corpus& a, const Corpus& b) {
  Corpus c = a;
  c.samples.insert(c.samples.end(), b.samples.begin(), b.samples.end());
  c.latent_visible = a.latent_visible && b.latent_visible;
  return c;
}

} // namespace latentlab
