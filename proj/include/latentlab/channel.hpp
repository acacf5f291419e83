#pragma once

// Augmentation channels: retrieval (R_t) and tool output (A_t) as extra
// conditioning symbols. A channel emits a symbol from a readout table keyed by
// (regime, latent, last c tokens of the prefix). Given (prefix, k, z) the
// symbol is drawn independently of the next token, so conditioning on it can
// only lower the residual dependence on the latent circumstances.

#include <algorithm>
#include <optional>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "latentlab/process.hpp"

namespace latentlab {

enum class ChannelKind { Retrieval, Tool };

inline const char* to_string(ChannelKind kind) {
  return kind == ChannelKind::Retrieval ? "retrieval" : "tool";
}

/// Readout entry; empty optionals are wildcards.
struct ChannelRule {
  std::optional<std::size_t> regime;
  std::optional<std::size_t> latent;
  std::optional<TokenSequence> context;
  std::vector<double> row; ///< distribution over the channel's symbols
};

struct ChannelSpec {
  std::string name;
  ChannelKind kind = ChannelKind::Retrieval;
  /// Symbol ids. Must lie outside the token alphabet, i.e. >= vocab_size.
  std::vector<int> symbols;
  /// Whether the readout may depend on (k, z). Prefix-only tools set this false.
  bool reads_latent = true;
  /// Number of trailing prefix tokens the readout may look at.
  std::size_t context_order = 0;
  /// Present at query time only, never in training data (prompt injection).
  bool inference_only = false;
  std::vector<ChannelRule> readout;
};

class AugmentationChannel {
public:
  const std::string& name() const { return name_; }
  ChannelKind kind() const { return kind_; }
  bool reads_latent() const { return reads_latent_; }
  bool inference_only() const { return inference_only_; }
  std::size_t context_order() const { return context_order_; }
  std::size_t symbol_count() const { return symbols_.size(); }
  int symbol_id(std::size_t index) const { return symbols_.at(index); }
  const std::vector<int>& symbols() const { return symbols_; }

  /// A channel that reads no prefix tokens is drawn once per sequence.
  bool per_sequence() const { return context_order_ == 0; }

  /// Distribution over symbol indices given (k, z, prefix).
  std::span<const double> readout(std::size_t k, std::size_t z, std::span<const Token> prefix) const {
    const std::size_t slot = latent_offset_.at(k) + z;
    const std::size_t offset = (slot * context_count_ + context_index(prefix)) * symbols_.size();
    return std::span<const double>(table_).subspan(offset, symbols_.size());
  }

private:
  friend AugmentationChannel build_channel(const ChannelSpec&, const LatentWorld&);

  std::size_t context_index(std::span<const Token> prefix) const {
    std::size_t index = 0;
    for (std::size_t i = 0; i < context_order_; ++i) {
      const std::size_t back = context_order_ - i;
      const Token tok = back <= prefix.size() ? prefix[prefix.size() - back] : kBos;
      index = index * (vocab_size_ + 1) + (tok == kBos ? vocab_size_ : static_cast<std::size_t>(tok));
    }
    return index;
  }

  std::string name_;
  ChannelKind kind_ = ChannelKind::Retrieval;
  bool reads_latent_ = true;
  bool inference_only_ = false;
  std::size_t context_order_ = 0;
  std::size_t vocab_size_ = 0;
  std::size_t context_count_ = 1;
  std::vector<int> symbols_;
  std::vector<std::size_t> latent_offset_;
  std::vector<double> table_; // [k,z][context][symbol]
};

/// Validates a channel against the world it will observe.
///
/// Lookup for (k, z, context) takes the first rule matching, in order, the
/// patterns (k,z,c) (k,z,*) (k,*,c) (k,*,*) (*,z,c) (*,z,*) (*,*,c) (*,*,*).
inline AugmentationChannel build_channel(const ChannelSpec& spec, const LatentWorld& world) {
  const std::string where = "channel" + (spec.name.empty() ? std::string() : " " + spec.name);
  if (spec.symbols.empty()) throw ConfigError(where + ": needs at least one symbol");
  std::set<int> seen;
  for (int s : spec.symbols) {
    if (s >= 0 && static_cast<std::size_t>(s) < world.vocab_size())
      throw ConfigError(where + ": symbol " + std::to_string(s) +
                        " collides with the token alphabet 0.." +
                        std::to_string(world.vocab_size() - 1));
    if (s < 0) throw ConfigError(where + ": symbol ids must be non-negative");
    if (!seen.insert(s).second) throw ConfigError(where + ": duplicate symbol " + std::to_string(s));
  }
  const std::uint64_t ctx_count =
      LatentWorld::saturating_power(world.vocab_size() + 1, spec.context_order);
  if (ctx_count > kMaxContextTableSize) throw ConfigError(where + ": context_order too large");

  AugmentationChannel ch;
  ch.name_ = spec.name;
  ch.kind_ = spec.kind;
  ch.reads_latent_ = spec.reads_latent;
  ch.inference_only_ = spec.inference_only;
  ch.context_order_ = spec.context_order;
  ch.vocab_size_ = world.vocab_size();
  ch.context_count_ = static_cast<std::size_t>(ctx_count);
  ch.symbols_ = spec.symbols;

  std::size_t slots = 0;
  for (std::size_t k = 0; k < world.regime_count(); ++k) {
    ch.latent_offset_.push_back(slots);
    slots += world.regime(k).latent_size();
  }
  const std::size_t S = spec.symbols.size();
  ch.table_.assign(slots * ch.context_count_ * S, 1.0 / static_cast<double>(S));

  for (const ChannelRule& rule : spec.readout) {
    if ((rule.regime || rule.latent) && !spec.reads_latent)
      throw ConfigError(where + ": readout keyed by regime/latent but reads_latent is false");
    if (rule.regime && *rule.regime >= world.regime_count())
      throw ConfigError(where + ": regime " + std::to_string(*rule.regime) + " out of range");
    if (rule.latent) {
      std::size_t max_latent = 0;
      for (std::size_t k = 0; k < world.regime_count(); ++k)
        max_latent = std::max(max_latent, world.regime(k).latent_size());
      const bool ok = rule.regime ? *rule.latent < world.regime(*rule.regime).latent_size()
                                  : *rule.latent < max_latent;
      if (!ok) throw ConfigError(where + ": latent " + std::to_string(*rule.latent) + " out of range");
    }
    if (rule.context && rule.context->size() != spec.context_order)
      throw ConfigError(where + ": readout context " + format_context(*rule.context) +
                        " does not have length " + std::to_string(spec.context_order));
    if (rule.context)
      for (Token t : *rule.context)
        if (t != kBos && !world.valid_token(t))
          throw ConfigError(where + ": readout context " + format_context(*rule.context) +
                            " has a token outside the vocabulary");
    if (rule.row.size() != S)
      throw ConfigError(where + ": readout row has " + std::to_string(rule.row.size()) +
                        " entries for " + std::to_string(S) + " symbols");
    detail::check_probability_vector(rule.row, where + ": readout row");
    if (spec.kind == ChannelKind::Tool &&
        std::count(rule.row.begin(), rule.row.end(), 0.0) != static_cast<std::ptrdiff_t>(S - 1))
      throw ConfigError(where + ": tool readouts must be deterministic (point-mass rows)");
  }

  // Contexts the readout can be asked about: the last c tokens of any prefix
  // of length 0..horizon-1, padded.
  std::vector<TokenSequence> contexts;
  for (std::size_t pad = spec.context_order + 1; pad-- > 0;) {
    const std::size_t free = spec.context_order - pad;
    if (free > world.horizon() - 1) continue;
    const std::uint64_t n = LatentWorld::saturating_power(world.vocab_size(), free);
    for (std::uint64_t code = 0; code < n; ++code) {
      TokenSequence ctx(spec.context_order, kBos);
      std::uint64_t c = code;
      for (std::size_t i = spec.context_order; i-- > pad;) {
        ctx[i] = static_cast<Token>(c % world.vocab_size());
        c /= world.vocab_size();
      }
      contexts.push_back(std::move(ctx));
    }
  }

  for (std::size_t k = 0; k < world.regime_count(); ++k)
    for (std::size_t z = 0; z < world.regime(k).latent_size(); ++z)
      for (const TokenSequence& ctx : contexts) {
        const ChannelRule* chosen = nullptr;
        for (int pattern = 0; pattern < 8 && !chosen; ++pattern) {
          const bool want_k = !(pattern & 4), want_z = !(pattern & 2), want_c = !(pattern & 1);
          for (const ChannelRule& rule : spec.readout) {
            if (rule.regime.has_value() != want_k || rule.latent.has_value() != want_z ||
                rule.context.has_value() != want_c)
              continue;
            if (want_k && *rule.regime != k) continue;
            if (want_z && *rule.latent != z) continue;
            if (want_c && *rule.context != ctx) continue;
            chosen = &rule;
            break;
          }
        }
        if (!chosen)
          throw ConfigError(where + ": no readout row for regime " + std::to_string(k) + ", z " +
                            std::to_string(z) + ", context " + format_context(ctx));
        const std::size_t offset =
            ((ch.latent_offset_[k] + z) * ch.context_count_ + ch.context_index(ctx)) * S;
        const double total = std::accumulate(chosen->row.begin(), chosen->row.end(), 0.0);
        for (std::size_t s = 0; s < S; ++s) ch.table_[offset + s] = chosen->row[s] / total;
      }
  return ch;
}

// Stock channels. Symbol ids start at vocab_size.

/// Reveals (k, z) exactly: one symbol per latent slot.
inline ChannelSpec identity_channel_spec(const LatentWorld& world,
                                         ChannelKind kind = ChannelKind::Retrieval) {
  ChannelSpec spec;
  spec.name = "identity";
  spec.kind = kind;
  std::size_t slots = 0;
  for (std::size_t k = 0; k < world.regime_count(); ++k) slots += world.regime(k).latent_size();
  std::size_t slot = 0;
  for (std::size_t k = 0; k < world.regime_count(); ++k)
    for (std::size_t z = 0; z < world.regime(k).latent_size(); ++z, ++slot) {
      spec.symbols.push_back(static_cast<int>(world.vocab_size() + slot));
      std::vector<double> row(slots, 0.0);
      row[slot] = 1.0;
      spec.readout.push_back({k, z, std::nullopt, std::move(row)});
    }
  return spec;
}

/// Always emits the same symbol.
inline ChannelSpec constant_channel_spec(const LatentWorld& world) {
  ChannelSpec spec;
  spec.name = "constant";
  spec.reads_latent = false;
  spec.symbols = {static_cast<int>(world.vocab_size())};
  spec.readout.push_back({std::nullopt, std::nullopt, std::nullopt, {1.0}});
  return spec;
}

/// Single-regime worlds: reveals z with probability `reveal`, otherwise a null symbol.
/// Symbol vocab_size is the null symbol; vocab_size + 1 + z reveals z.
inline ChannelSpec coin_flip_channel_spec(const LatentWorld& world, double reveal) {
  if (world.regime_count() != 1) throw ConfigError("coin-flip channel needs a single-regime world");
  const std::size_t Z = world.regime(0).latent_size();
  ChannelSpec spec;
  spec.name = "coin-flip";
  for (std::size_t s = 0; s <= Z; ++s) spec.symbols.push_back(static_cast<int>(world.vocab_size() + s));
  for (std::size_t z = 0; z < Z; ++z) {
    std::vector<double> row(Z + 1, 0.0);
    row[0] = 1.0 - reveal;
    row[1 + z] = reveal;
    spec.readout.push_back({std::nullopt, z, std::nullopt, std::move(row)});
  }
  return spec;
}

/// Deterministic tool A_t = tau(last `order` tokens). `tau` maps a padded
/// context to a symbol index in [0, symbol_count).
template <typename Fn>
ChannelSpec prefix_tool_spec(const LatentWorld& world, std::size_t order, std::size_t symbol_count,
                             Fn tau) {
  ChannelSpec spec;
  spec.name = "prefix-tool";
  spec.kind = ChannelKind::Tool;
  spec.reads_latent = false;
  spec.context_order = order;
  for (std::size_t s = 0; s < symbol_count; ++s)
    spec.symbols.push_back(static_cast<int>(world.vocab_size() + s));
  const std::uint64_t n = LatentWorld::saturating_power(world.vocab_size() + 1, order);
  for (std::uint64_t code = 0; code < n; ++code) {
    TokenSequence ctx(order);
    std::uint64_t c = code;
    for (std::size_t i = order; i-- > 0;) {
      const auto d = c % (world.vocab_size() + 1);
      ctx[i] = d == world.vocab_size() ? kBos : static_cast<Token>(d);
      c /= world.vocab_size() + 1;
    }
    // Padding may only lead the window.
    bool well_formed = true;
    for (std::size_t i = 1; i < order; ++i)
      if (ctx[i] == kBos && ctx[i - 1] != kBos) well_formed = false;
    if (!well_formed) continue;
    std::vector<double> row(symbol_count, 0.0);
    row.at(static_cast<std::size_t>(tau(std::as_const(ctx)))) = 1.0;
    spec.readout.push_back({std::nullopt, std::nullopt, ctx, std::move(row)});
  }
  return spec;
}

} // namespace latentlab
