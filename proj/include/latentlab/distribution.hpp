#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latentlab/errors.hpp"

namespace latentlab {

using Token = int;
using TokenSequence = std::vector<Token>;

inline constexpr double kNormTolerance = 1e-9;

/// Normalized probability vector over a finite alphabet.
class TokenDistribution {
public:
  TokenDistribution() = default;

  /// Validates non-negativity and normalization (within 1e-9), then
  /// renormalizes exactly.
  explicit TokenDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw ConfigError("distribution over an empty alphabet");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw ConfigError("distribution has a negative or non-finite entry");
      total += p;
    }
    if (std::abs(total - 1.0) > kNormTolerance)
      throw ConfigError("distribution sums to " + std::to_string(total) + ", not 1");
    for (double& p : probs_) p /= total;
  }

  static TokenDistribution uniform(std::size_t size) {
    return TokenDistribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
  }

  static TokenDistribution point_mass(std::size_t size, std::size_t index) {
    std::vector<double> p(size, 0.0);
    p.at(index) = 1.0;
    return TokenDistribution(std::move(p));
  }

  /// Normalizes non-negative weights. Throws ZeroSupportError if they are all zero.
  static TokenDistribution from_weights(std::vector<double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0)) throw ZeroSupportError("all weights vanish");
    for (double& w : weights) w /= total;
    TokenDistribution d;
    d.probs_ = std::move(weights);
    return d;
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }
  const std::vector<double>& vector() const { return probs_; }

  /// Lowest index attaining the maximum probability.
  std::size_t argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs_.size(); ++i)
      if (probs_[i] > probs_[best]) best = i;
    return best;
  }

  friend bool operator==(const TokenDistribution&, const TokenDistribution&) = default;

private:
  std::vector<double> probs_;
};

} // namespace latentlab
