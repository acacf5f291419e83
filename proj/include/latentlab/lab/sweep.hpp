#pragma once

// Parameter sweeps: the Cartesian product of the knob lists, one CSV row per
// cell with medians over seeds. Cells with alpha > 0 run the contamination
// recursion for `generations` rounds and report the last generation's model.

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "latentlab/dynamics.hpp"
#include "latentlab/lab/parallel.hpp"
#include "latentlab/lab/report.hpp"
#include "latentlab/lab/stats.hpp"
#include "latentlab/world_io.hpp"

namespace latentlab::lab {

struct SweepGrid {
  std::vector<std::size_t> n_transitions{1000};
  std::vector<double> alpha{0.0};
  std::vector<double> temperature{1.0};
  std::vector<double> smoothing{0.5};
  std::vector<std::size_t> order; ///< empty: horizon - 1
  std::size_t generations = 10;

  std::size_t cell_count() const {
    return n_transitions.size() * alpha.size() * temperature.size() * smoothing.size() *
           std::max<std::size_t>(order.size(), 1);
  }

  void validate() const {
    if (n_transitions.empty() || alpha.empty() || temperature.empty() || smoothing.empty())
      throw ConfigError("sweep grid has an empty knob");
    for (auto n : n_transitions)
      if (n == 0) throw ConfigError("sweep: N must be positive");
    for (double a : alpha)
      if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sweep: alpha must lie in [0, 1]");
    for (double t : temperature)
      if (!(t > 0.0)) throw ConfigError("sweep: temperature must be positive");
    for (double l : smoothing)
      if (!(l >= 0.0)) throw ConfigError("sweep: smoothing must be non-negative");
    if (generations < 1) throw ConfigError("sweep: generations must be at least 1");
  }
};

/// "0.25,0.5,1" -> {0.25, 0.5, 1}.
inline std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : latentlab::detail::split(text, ',')) {
    try {
      out.push_back(parse_double(item));
    } catch (const std::invalid_argument&) {
      throw ConfigError("list value \"" + item + "\" is not a number");
    }
  }
  return out;
}

inline std::vector<std::size_t> parse_size_list(std::string_view text) {
  std::vector<std::size_t> out;
  for (const auto& item : latentlab::detail::split(text, ',')) out.push_back(latentlab::detail::parse_index(item, "list value"));
  return out;
}

/// Mean entropy of the temperature-transformed model rows at contexts the
/// world reaches. Unsupported contexts are skipped.
inline double tempered_entropy(const TabularModel& model, const LatentWorld& world, double temperature) {
  std::set<ContextKey> seen;
  double sum = 0.0;
  for (std::size_t t = 0; t < world.horizon(); ++t)
    for_each_prefix(world, t, world.enumeration_budget(), [&](const TokenSequence& prefix, const JointWeights&) {
      const ContextKey key = model.key_for(prefix);
      if (!seen.insert(key).second) return;
      try {
        sum += entropy(apply_temperature(model.conditional(key), temperature));
      } catch (const UnsupportedContextError&) {
        seen.erase(key);
      }
    });
  return seen.empty() ? 0.0 : sum / static_cast<double>(seen.size());
}

struct SweepCell {
  std::size_t n_transitions = 0;
  double alpha = 0.0;
  double temperature = 1.0;
  double smoothing = 0.0;
  std::size_t order = 0;
};

/// Cells in row order: N outermost, then alpha, temperature, lambda, order.
inline std::vector<SweepCell> sweep_cells(const LatentWorld& world, const SweepGrid& grid) {
  grid.validate();
  const std::vector<std::size_t> orders =
      grid.order.empty() ? std::vector<std::size_t>{world.horizon() - 1} : grid.order;
  std::vector<SweepCell> cells;
  for (std::size_t N : grid.n_transitions)
    for (double alpha : grid.alpha)
      for (double T : grid.temperature)
        for (double lambda : grid.smoothing)
          for (std::size_t order : orders) cells.push_back({N, alpha, T, lambda, order});
  return cells;
}

inline std::vector<std::string> run_sweep_cell(const LatentWorld& world, const SweepGrid& grid, const SweepCell& c,
                                               const std::vector<std::uint64_t>& seeds) {
  std::vector<double> kl, h, tail;
  const std::size_t sequences = std::max<std::size_t>(1, c.n_transitions / world.horizon());
  for (auto seed : seeds) {
    // Same stream for every cell: cells differ only in their knobs.
    Rng rng(derive_seed(seed, 1100));
    TabularModel model = [&] {
      if (c.alpha == 0.0) return fit_tabular(sample_corpus(world, sequences, rng), world, c.order, c.smoothing);
      auto s = ContaminationSchedule::with_alpha(c.alpha, sequences);
      s.generations = grid.generations;
      s.order = c.order;
      s.smoothing = c.smoothing;
      s.decoding = DecodingPolicy::sample(c.temperature);
      s.heldout_sequences = 0;
      return run_generations(world, s, rng).models.back();
    }();
    const auto rec = generation_metrics(model, world);
    kl.push_back(rec.kl_bits);
    tail.push_back(rec.tail_mass);
    h.push_back(tempered_entropy(model, world, c.temperature));
  }
  return {std::to_string(c.n_transitions), format_double(c.alpha), format_double(c.temperature),
          format_double(c.smoothing), std::to_string(c.order), std::to_string(seeds.size()),
          format_double(median(kl)), format_double(median(h)), format_double(median(tail))};
}

/// Cells run concurrently; rows are merged by cell id, so output does not
/// depend on `threads`.
inline CsvTable run_sweep(const LatentWorld& world, const SweepGrid& grid, const std::vector<std::uint64_t>& seeds,
                          std::size_t threads = 0) {
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  const auto cells = sweep_cells(world, grid);
  std::vector<std::vector<std::string>> rows(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) { rows[i] = run_sweep_cell(world, grid, cells[i], seeds); }, threads);
  CsvTable out{{"cell", "N", "alpha", "temperature", "lambda", "order", "seeds", "median_kl_bits",
                "median_entropy_bits", "median_tail_mass"},
               {}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].insert(rows[i].begin(), std::to_string(i));
    out.add(std::move(rows[i]));
  }
  return out;
}

} // namespace latentlab::lab
