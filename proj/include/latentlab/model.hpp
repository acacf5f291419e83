#pragma once

// Count-based next-token estimators (p_theta) and temperature decoding
// (p_theta,T). Fitting is tabular maximum likelihood with optional add-lambda
// smoothing; per context the normalized counts are the exact minimizer of the
// corpus cross-entropy.

#include <cmath>
#include <compare>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "latentlab/exact.hpp"
#include "latentlab/process.hpp"
#include "latentlab/random.hpp"

namespace latentlab {

inline constexpr int kNoSymbol = -1;

/// Model lookup key: last m' tokens (kBos-padded), plus an augmentation
/// symbol when the model was trained with one.
struct ContextKey {
  TokenSequence context;
  int symbol = kNoSymbol;

  auto operator<=>(const ContextKey&) const = default;
  bool operator==(const ContextKey&) const = default;
};

inline std::string format_key(const ContextKey& key) {
  std::string s = format_context(key.context);
  if (key.symbol != kNoSymbol) s += "|" + std::to_string(key.symbol);
  return s;
}

struct Provenance {
  std::string corpus_id;
  std::size_t transitions = 0;

  bool operator==(const Provenance&) const = default;
};

struct SupportRecord {
  double count = 0.0;
  bool supported = false;
};

/// Counts per context. Counts are stored as doubles so that exact-row models
/// (true marginals installed directly) share the representation; fitted
/// models only ever hold integers.
class TabularModel {
public:
  TabularModel() = default;
  TabularModel(std::size_t vocab_size, std::size_t order, double smoothing)
      : vocab_size_(vocab_size), order_(order), smoothing_(smoothing) {
    if (vocab_size < 2) throw ConfigError("model vocabulary must have at least 2 tokens");
    if (!(smoothing >= 0.0) || !std::isfinite(smoothing))
      throw ConfigError("smoothing must be a finite non-negative number");
  }

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t order() const { return order_; }
  double smoothing() const { return smoothing_; }
  const Provenance& provenance() const { return provenance_; }
  void set_provenance(Provenance p) { provenance_ = std::move(p); }
  const std::map<ContextKey, std::vector<double>>& rows() const { return counts_; }

  ContextKey key_for(std::span<const Token> prefix, int symbol = kNoSymbol) const {
    return {context_window(prefix, order_), symbol};
  }

  void add_count(const ContextKey& key, Token next, double weight = 1.0) {
    auto& row = counts_[key];
    if (row.empty()) row.assign(vocab_size_, 0.0);
    row.at(static_cast<std::size_t>(next)) += weight;
  }

  void set_row(const ContextKey& key, std::vector<double> counts) {
    if (counts.size() != vocab_size_) throw ConfigError("row size does not match vocabulary");
    counts_[key] = std::move(counts);
  }

  double context_count(const ContextKey& key) const {
    const auto it = counts_.find(key);
    if (it == counts_.end()) return 0.0;
    double n = 0.0;
    for (double c : it->second) n += c;
    return n;
  }

  /// Smoothed row (c + lambda) / (n + V lambda). Unsupported at lambda = 0
  /// when the context has no counts.
  TokenDistribution conditional(const ContextKey& key) const {
    const auto it = counts_.find(key);
    const double n = context_count(key);
    if (n <= 0.0 && smoothing_ <= 0.0)
      throw UnsupportedContextError("context " + format_key(key) + " was never observed in training");
    std::vector<double> row(vocab_size_, smoothing_);
    if (it != counts_.end())
      for (std::size_t v = 0; v < vocab_size_; ++v) row[v] += it->second[v];
    return TokenDistribution::from_weights(std::move(row));
  }

  bool operator==(const TabularModel&) const = default;

private:
  std::size_t vocab_size_ = 0;
  std::size_t order_ = 0;
  double smoothing_ = 0.0;
  Provenance provenance_;
  std::map<ContextKey, std::vector<double>> counts_;
};

/// Tabular maximum likelihood over every (context, next token) pair. Reads
/// token streams only; regime and latent fields are never touched.
inline TabularModel fit_tabular(const Corpus& corpus, std::size_t vocab_size, std::size_t order,
                                double smoothing) {
  if (corpus.samples.empty()) throw ConfigError("cannot fit a model on an empty corpus");
  TabularModel model(vocab_size, order, smoothing);
  for (const auto& s : corpus.samples) {
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      const Token next = s.tokens[t];
      if (next < 0 || static_cast<std::size_t>(next) >= vocab_size)
        throw ConfigError("corpus token " + std::to_string(next) + " outside vocabulary");
      model.add_count(model.key_for(std::span(s.tokens).first(t)), next);
    }
  }
  model.set_provenance({corpus.id(), corpus.transitions()});
  return model;
}

inline TabularModel fit_tabular(const Corpus& corpus, const LatentWorld& world, std::size_t order,
                                double smoothing) {
  return fit_tabular(corpus, world.vocab_size(), order, smoothing);
}

inline TokenDistribution model_conditional(const TabularModel& model, std::span<const Token> prefix,
                                           int symbol = kNoSymbol) {
  return model.conditional(model.key_for(prefix, symbol));
}

inline SupportRecord context_support(const TabularModel& model, std::span<const Token> prefix,
                                     int symbol = kNoSymbol) {
  const double n = model.context_count(model.key_for(prefix, symbol));
  return {n, n > 0.0};
}

/// p_T(i) = exp(l_i / T) / sum_j exp(l_j / T) with logits l_i = log p_i.
/// Zero-probability entries have logit -inf and stay zero for every T.
inline TokenDistribution apply_temperature(const TokenDistribution& d, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw ConfigError("temperature must be finite and positive (use greedy decoding for T -> 0)");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double p : d.probs())
    if (p > 0.0) max_logit = std::max(max_logit, std::log(p));
  std::vector<double> out(d.size(), 0.0);
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) out[i] = std::exp((std::log(d[i]) - max_logit) / temperature);
  return TokenDistribution::from_weights(std::move(out));
}

/// Temperature sampling, or greedy argmax (lowest index on ties).
struct DecodingPolicy {
  bool greedy = false;
  double temperature = 1.0;

  static DecodingPolicy sample(double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw ConfigError("temperature must be finite and positive");
    return {false, temperature};
  }
  static DecodingPolicy argmax() { return {true, 1.0}; }

  std::string describe() const {
    return greedy ? std::string("greedy") : "T=" + format_double(temperature);
  }
};

/// Draws one token from the model at `prefix` under the policy.
inline Token decode_step(const TabularModel& model, const DecodingPolicy& policy,
                         std::span<const Token> prefix, Rng& rng, int symbol = kNoSymbol) {
  const TokenDistribution row = model_conditional(model, prefix, symbol);
  if (policy.greedy) return static_cast<Token>(row.argmax());
  if (policy.temperature == 1.0) return static_cast<Token>(draw_index(row.probs(), rng));
  return static_cast<Token>(draw_index(apply_temperature(row, policy.temperature).probs(), rng));
}

inline TokenSequence generate(const TabularModel& model, const DecodingPolicy& policy,
                              std::size_t length, Rng& rng) {
  TokenSequence out;
  out.reserve(length);
  for (std::size_t t = 0; t < length; ++t) out.push_back(decode_step(model, policy, out, rng));
  return out;
}

/// Mean -log2 p_theta(x_{t+1} | x_<=t) over every transition; +inf when the
/// model gives a realized transition zero probability or has no row for it.
inline double corpus_cross_entropy(const TabularModel& model, const Corpus& corpus) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : corpus.samples) {
    for (std::size_t t = 0; t < s.tokens.size(); ++t, ++n) {
      double p = 0.0;
      try {
        p = model_conditional(model, std::span(s.tokens).first(t))[static_cast<std::size_t>(s.tokens[t])];
      } catch (const UnsupportedContextError&) {
        return std::numeric_limits<double>::infinity();
      }
      if (p <= 0.0) return std::numeric_limits<double>::infinity();
      total -= std::log2(p);
    }
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

/// A model whose rows are the exact p_marg of the world at every reachable
/// prefix. Its order is horizon - 1, so each context identifies its prefix.
inline TabularModel exact_marginal_model(const LatentWorld& world, double smoothing = 0.0) {
  TabularModel model(world.vocab_size(), world.horizon() - 1, smoothing);
  for (std::size_t t = 0; t < world.horizon(); ++t) {
    for_each_prefix(world, t, world.enumeration_budget(),
                    [&](const TokenSequence& prefix, const JointWeights& w) {
                      model.set_row(model.key_for(prefix), blend_rows(world, w, prefix).vector());
                    });
  }
  model.set_provenance({"exact-marginal:" + world.name(), 0});
  return model;
}

} // namespace latentlab
