#pragma once

// Generational contamination: model n+1 is fit on a corpus mixing fresh real
// sequences with sequences generated by model n,
//   P_{n+1} = (1 - alpha) P + alpha Q_{theta_n, T_n},
// realized with finite corpora. Synthetic data always comes from the
// immediately preceding model only.

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "latentlab/csv.hpp"
#include "latentlab/info.hpp"
#include "latentlab/model.hpp"

namespace latentlab {

struct ContaminationSchedule {
  double alpha = 0.0;
  std::size_t generations = 10;
  std::size_t fresh_per_generation = 0;
  std::size_t synthetic_per_generation = 0;
  DecodingPolicy decoding = DecodingPolicy::sample(1.0);
  std::size_t order = 1;
  double smoothing = 0.0;
  double tail_epsilon = 1e-3;
  /// Real sequences drawn once, before generation 0, for held-out cross-entropy.
  std::size_t heldout_sequences = 200;
  /// Resampling attempts per synthetic sequence after hitting an unsupported context.
  std::size_t max_retries = 32;

  /// Splits `sequences_per_generation` into fresh and synthetic parts realizing alpha.
  static ContaminationSchedule with_alpha(double alpha, std::size_t sequences_per_generation) {
    ContaminationSchedule s;
    s.alpha = alpha;
    s.synthetic_per_generation =
        static_cast<std::size_t>(std::llround(alpha * static_cast<double>(sequences_per_generation)));
    s.fresh_per_generation = sequences_per_generation - s.synthetic_per_generation;
    return s;
  }

  std::size_t total_per_generation() const { return fresh_per_generation + synthetic_per_generation; }

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (generations < 1) throw ConfigError("schedule needs at least one generation");
    const std::size_t total = total_per_generation();
    if (total == 0) throw ConfigError("schedule draws no sequences per generation");
    const double realized = static_cast<double>(synthetic_per_generation) / static_cast<double>(total);
    if (std::abs(realized - alpha) > 1.0 / static_cast<double>(total) + 1e-12)
      throw ConfigError("fresh/synthetic counts realize alpha " + format_double(realized) + ", not " +
                        format_double(alpha));
    if (!(tail_epsilon > 0.0)) throw ConfigError("tail threshold must be positive");
    if (!decoding.greedy && !(decoding.temperature > 0.0)) throw ConfigError("temperature must be positive");
  }
};

struct GenerationRecord {
  std::size_t generation = 0;
  double kl_bits = 0.0;           ///< mean over positions of E KL(p_marg || p_theta)
  double mean_entropy_bits = 0.0; ///< mean entropy of supported model rows at world-reachable contexts
  std::size_t support_size = 0;   ///< contexts with at least one count
  double tail_mass = 0.0;         ///< true next-token mass the model puts below epsilon
  double heldout_ce_bits = std::numeric_limits<double>::quiet_NaN();
};

struct TraceEvent {
  std::size_t generation = 0;
  std::size_t retries = 0;
  std::string message;
};

struct GenerationTrace {
  std::vector<GenerationRecord> records;
  std::vector<TraceEvent> events;
  std::vector<TabularModel> models; ///< models[n] produced records[n]

  CsvTable table() const {
    CsvTable t{{"generation", "kl_bits", "mean_entropy_bits", "support_size", "tail_mass", "heldout_ce_bits"}, {}};
    for (const auto& r : records)
      t.add({std::to_string(r.generation), format_double(r.kl_bits), format_double(r.mean_entropy_bits),
             std::to_string(r.support_size), format_double(r.tail_mass), format_double(r.heldout_ce_bits)});
    return t;
  }
};

/// The five trace fields for one model. Held-out cross-entropy is NaN without
/// a held-out corpus.
inline GenerationRecord generation_metrics(const TabularModel& model, const LatentWorld& world,
                                           const Corpus* heldout = nullptr, double tail_epsilon = 1e-3) {
  GenerationRecord rec;
  for (const auto& [key, counts] : model.rows()) {
    double n = 0.0;
    for (double c : counts) n += c;
    if (n > 0.0) ++rec.support_size;
  }

  std::set<ContextKey> visited;
  double entropy_sum = 0.0;
  std::size_t entropy_rows = 0;
  double kl_sum = 0.0;
  double tail_sum = 0.0;
  for (std::size_t t = 0; t < world.horizon(); ++t) {
    double kl = 0.0;
    for_each_prefix(world, t, world.enumeration_budget(), [&](const TokenSequence& prefix, const JointWeights& w) {
      const double weight = total_weight(w);
      const TokenDistribution marg = blend_rows(world, w, prefix);
      const ContextKey key = model.key_for(prefix);
      std::optional<TokenDistribution> q;
      try {
        q = model.conditional(key);
      } catch (const UnsupportedContextError&) {
      }
      if (q && visited.insert(key).second) {
        entropy_sum += detail::entropy_bits(q->probs());
        ++entropy_rows;
      }
      kl += q ? weight * kl_divergence(marg, *q) : kInfiniteKl;
      for (std::size_t v = 0; v < marg.size(); ++v)
        if (marg[v] > 0.0 && (!q || (*q)[v] < tail_epsilon)) tail_sum += weight * marg[v];
    });
    kl_sum += kl;
  }
  const double positions = static_cast<double>(world.horizon());
  rec.kl_bits = kl_sum / positions;
  rec.tail_mass = tail_sum / positions;
  rec.mean_entropy_bits = entropy_rows ? entropy_sum / static_cast<double>(entropy_rows) : 0.0;
  if (heldout) rec.heldout_ce_bits = corpus_cross_entropy(model, *heldout);
  return rec;
}

namespace detail {

inline SequenceSample synthesize(const TabularModel& model, const ContaminationSchedule& schedule,
                                 std::size_t length, Rng& rng, std::size_t& retries) {
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      SequenceSample s;
      s.tokens = generate(model, schedule.decoding, length, rng);
      return s;
    } catch (const UnsupportedContextError& e) {
      if (attempt >= schedule.max_retries)
        throw Error(std::string("synthetic generation kept reaching unsupported contexts: ") + e.what());
      ++retries;
    }
  }
}

} // namespace detail

/// Runs generations 0..G. Generation 0 is fit on pure real data unless an
/// initial model is supplied, in which case it stands in for generation 0.
inline GenerationTrace run_generations(const LatentWorld& world, const ContaminationSchedule& schedule, Rng& rng,
                                       const std::optional<TabularModel>& initial = std::nullopt) {
  schedule.validate();
  GenerationTrace trace;
  std::optional<Corpus> heldout;
  if (schedule.heldout_sequences > 0) heldout = sample_corpus(world, schedule.heldout_sequences, rng);
  const Corpus* heldout_ptr = heldout ? &*heldout : nullptr;

  TabularModel current = initial
                             ? *initial
                             : fit_tabular(sample_corpus(world, schedule.total_per_generation(), rng), world,
                                           schedule.order, schedule.smoothing);
  auto record = [&](std::size_t n) {
    GenerationRecord r = generation_metrics(current, world, heldout_ptr, schedule.tail_epsilon);
    r.generation = n;
    trace.records.push_back(r);
    trace.models.push_back(current);
  };
  record(0);

  for (std::size_t n = 1; n <= schedule.generations; ++n) {
    Corpus corpus;
    if (schedule.fresh_per_generation > 0) corpus = sample_corpus(world, schedule.fresh_per_generation, rng);
    std::size_t retries = 0;
    for (std::size_t i = 0; i < schedule.synthetic_per_generation; ++i)
      corpus.samples.push_back(detail::synthesize(current, schedule, world.horizon(), rng, retries));
    if (retries > 0)
      trace.events.push_back({n, retries, "resampled synthetic sequences after unsupported contexts"});
    current = fit_tabular(corpus, world, schedule.order, schedule.smoothing);
    record(n);
  }
  return trace;
}

} // namespace latentlab
