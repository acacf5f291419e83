#pragma once

// Reference answers by brute force: enumerate every complete path of every
// (regime, latent) pair and sum path probabilities. Shares nothing with the
// forward filter beyond the emission table lookup, so it can referee it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "latentlab/process.hpp"

namespace latentlab::oracle {

class PathOracle {
public:
  explicit PathOracle(const LatentWorld& world) : world_(world) {
    for (std::size_t k = 0; k < world.regime_count(); ++k)
      for (std::size_t z = 0; z < world.regime(k).latent_size(); ++z) slots_.push_back({k, z});
    TokenSequence path;
    for (std::size_t slot = 0; slot < slots_.size(); ++slot) {
      const auto [k, z] = slots_[slot];
      const double start = world.regime_weights()[k] * world.regime(k).latent_prior()[z];
      if (start > 0.0) walk(slot, path, start);
    }
  }

  std::size_t slot_count() const { return slots_.size(); }
  std::pair<std::size_t, std::size_t> slot(std::size_t i) const { return slots_[i]; }

  /// Probability that a sequence starts with `prefix` (all regimes and latents).
  double prefix_mass(std::span<const Token> prefix) const {
    const auto* m = find(prefix);
    if (!m) return 0.0;
    double s = 0.0;
    for (double v : *m) s += v;
    return s;
  }

  /// Joint probability of (slot, prefix).
  double slot_mass(std::size_t slot, std::span<const Token> prefix) const {
    const auto* m = find(prefix);
    return m ? (*m)[slot] : 0.0;
  }

  /// P(x_{t+1} = v | prefix) as a ratio of path sums.
  std::vector<double> conditional(std::span<const Token> prefix) const {
    const double denom = prefix_mass(prefix);
    std::vector<double> out(world_.vocab_size(), 0.0);
    TokenSequence ext(prefix.begin(), prefix.end());
    ext.push_back(0);
    for (std::size_t v = 0; v < out.size(); ++v) {
      ext.back() = static_cast<Token>(v);
      out[v] = prefix_mass(ext) / denom;
    }
    return out;
  }

  /// All positive-mass prefixes of a given length.
  std::vector<TokenSequence> prefixes(std::size_t length) const {
    std::vector<TokenSequence> out;
    for (const auto& [code, masses] : table_) {
      TokenSequence p = decode(code);
      if (p.size() != length) continue;
      double s = 0.0;
      for (double v : masses) s += v;
      if (s > 0.0) out.push_back(std::move(p));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Expected log-loss regret of the text-only law against the full law at
  /// position t, in bits: E log2 p_full(x|prefix,k,z) / p_marg(x|prefix).
  double regret_bits(std::size_t t) const {
    double total = 0.0;
    for (const auto& prefix : prefixes(t)) {
      const auto marg = conditional(prefix);
      for (std::size_t slot = 0; slot < slots_.size(); ++slot) {
        const auto [k, z] = slots_[slot];
        if (slot_mass(slot, prefix) == 0.0) continue;
        const auto row = world_.emission(k, z, prefix);
        TokenSequence ext = prefix;
        ext.push_back(0);
        for (std::size_t v = 0; v < row.size(); ++v) {
          ext.back() = static_cast<Token>(v);
          const double joint = slot_mass(slot, ext);
          if (joint > 0.0) total += joint * std::log2(row[v] / marg[v]);
        }
      }
    }
    return total;
  }

private:
  void walk(std::size_t slot, TokenSequence& path, double prob) {
    if (path.size() == world_.horizon()) {
      for (std::size_t len = 0; len <= path.size(); ++len) {
        auto& masses = table_[encode(std::span(path).first(len))];
        if (masses.empty()) masses.assign(slots_.size(), 0.0);
        masses[slot] += prob;
      }
      return;
    }
    const auto [k, z] = slots_[slot];
    const auto row = world_.emission(k, z, path);
    for (std::size_t v = 0; v < row.size(); ++v) {
      if (row[v] == 0.0) continue;
      path.push_back(static_cast<Token>(v));
      walk(slot, path, prob * row[v]);
      path.pop_back();
    }
  }

  std::uint64_t encode(std::span<const Token> prefix) const {
    std::uint64_t code = 0;
    for (Token t : prefix) code = code * (world_.vocab_size() + 1) + static_cast<std::uint64_t>(t) + 1;
    return code;
  }

  TokenSequence decode(std::uint64_t code) const {
    TokenSequence out;
    while (code) {
      out.push_back(static_cast<Token>(code % (world_.vocab_size() + 1)) - 1);
      code /= world_.vocab_size() + 1;
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  const std::vector<double>* find(std::span<const Token> prefix) const {
    const auto it = table_.find(encode(prefix));
    return it == table_.end() ? nullptr : &it->second;
  }

  const LatentWorld& world_;
  std::vector<std::pair<std::size_t, std::size_t>> slots_;
  std::unordered_map<std::uint64_t, std::vector<double>> table_;
};

} // namespace latentlab::oracle
