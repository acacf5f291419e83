#pragma once

#include <algorithm>
#include <vector>

#include "latentlab/errors.hpp"

namespace latentlab::lab {

/// Median; the mean of the two middle values for even sizes. +inf sorts last.
inline double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }
inline double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }

} // namespace latentlab::lab
