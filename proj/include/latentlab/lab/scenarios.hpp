#pragma once

// The built-in scenario library. Each scenario is a world plus a measurement
// plan; its checks are the pass/fail expectations reported by run_scenario.
// Default thresholds, overridable per run: 0.01 bits stands for "about zero",
// 0.1 bits for "bounded away from zero". Exact identities use 1e-12.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "latentlab/augment.hpp"
#include "latentlab/corpus_io.hpp"
#include "latentlab/dynamics.hpp"
#include "latentlab/info.hpp"
#include "latentlab/lab/parallel.hpp"
#include "latentlab/lab/path_oracle.hpp"
#include "latentlab/lab/random_world.hpp"
#include "latentlab/lab/report.hpp"
#include "latentlab/lab/stats.hpp"
#include "latentlab/lab/worlds.hpp"
#include "latentlab/model_io.hpp"

namespace latentlab::lab {

inline constexpr double kAboutZeroBits = 0.01;
inline constexpr double kAwayFromZeroBits = 0.1;
inline constexpr double kExactTolerance = 1e-12;

struct ScenarioOptions {
  std::vector<std::uint64_t> seeds;
  /// Overrides every world's enumeration budget.
  std::optional<std::uint64_t> budget;
  double about_zero_bits = kAboutZeroBits;
  double away_from_zero_bits = kAwayFromZeroBits;
};

/// Seeds first, first+1, ..., first+count-1.
inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = first + i;
  return s;
}

inline ScenarioOptions default_options() {
  ScenarioOptions o;
  o.seeds = seed_range(1, 20);
  return o;
}

struct Scenario {
  std::string name;
  std::string description;
  std::function<void(const ScenarioOptions&, ExperimentReport&)> run;
};

namespace detail {

inline std::string fmt(double v) { return format_double(v); }

inline LatentWorld make_world(WorldSpec spec, const ScenarioOptions& opt) {
  if (opt.budget) spec.enumeration_budget = *opt.budget;
  return build_world(spec);
}

inline Rng seeded(std::uint64_t seed, std::uint64_t stream) { return Rng(derive_seed(seed, stream)); }

/// Sequences needed for roughly `transitions` training pairs.
inline std::size_t sequences_for(const LatentWorld& world, std::size_t transitions) {
  return std::max<std::size_t>(1, transitions / world.horizon());
}

inline Corpus visible(Corpus c) {
  c.latent_visible = true;
  return c;
}

inline double mean_model_kl(const LatentWorld& world, const TabularModel& m) {
  return mean_over_positions(world, [&](std::size_t t) { return expected_model_kl(world, m, t); });
}

inline double mean_full_kl(const LatentWorld& world, const TabularModel& m) {
  return mean_over_positions(world, [&](std::size_t t) { return expected_full_kl(world, m, t); });
}

inline double mean_augmented_kl(const LatentWorld& world, const AugmentationChannel& ch, const TabularModel& m) {
  return mean_over_positions(world, [&](std::size_t t) { return expected_augmented_model_kl(world, ch, m, t); });
}

inline double mean_cmi(const LatentWorld& world) {
  return mean_over_positions(world, [&](std::size_t t) { return conditional_mutual_information(world, t).value_bits; });
}

inline const std::vector<std::size_t>& convergence_grid() {
  static const std::vector<std::size_t> grid{100, 1000, 10000, 100000};
  return grid;
}

inline bool strictly_decreasing_except_last(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    const bool last = i + 1 == v.size();
    if (last ? !(v[i] <= v[i - 1]) : !(v[i] < v[i - 1])) return false;
  }
  return true;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

inline CsvTable cmi_by_position(const LatentWorld& world, const AugmentationChannel* channel = nullptr) {
  CsvTable t{{"t", "cmi_bits", "h_cond", "h_cond_latent", "augmented_cmi_bits"}, {}};
  for (std::size_t pos = 0; pos < world.horizon(); ++pos) {
    const auto r = conditional_mutual_information(world, pos);
    t.add({std::to_string(pos), fmt(r.value_bits), fmt(r.h_cond_bits), fmt(r.h_cond_latent_bits),
           channel ? fmt(augmented_cmi(world, *channel, pos).value_bits) : ""});
  }
  return t;
}

// ---------------------------------------------------------------------------

inline void sufficient_island(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::sufficient_island_spec(), opt);
  CsvTable cmi{{"t", "cmi_bits", "regime0_cmi_bits", "regime1_cmi_bits"}, {}};
  double worst_after_first = 0.0;
  for (std::size_t t = 0; t < world.horizon(); ++t) {
    const double r0 = regime_cmi(world, 0, t).value_bits;
    if (t >= 1) worst_after_first = std::max(worst_after_first, r0);
    cmi.add({std::to_string(t), fmt(conditional_mutual_information(world, t).value_bits), fmt(r0),
             fmt(regime_cmi(world, 1, t).value_bits)});
  }
  rep.add_table("cmi", cmi);
  rep.check("regime0-cmi-about-zero-after-first-token", worst_after_first < opt.about_zero_bits,
            "max over t>=1 = " + fmt(worst_after_first));

  CsvTable conv{{"n_transitions", "median_model_kl_bits"}, {}};
  std::vector<double> medians;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t N = convergence_grid()[i];
    std::vector<double> kls;
    for (auto seed : opt.seeds) {
      Rng rng = seeded(seed, 100 + i);
      const auto m = fit_tabular(sample_corpus(world, sequences_for(world, N), rng), world, world.horizon() - 1, 0.5);
      kls.push_back(mean_model_kl(world, m));
    }
    medians.push_back(median(kls));
    conv.add({std::to_string(N), fmt(medians.back())});
  }
  rep.add_table("convergence", conv);
  rep.check("model-kl-decreases-with-n", strictly_decreasing_except_last(medians), join(medians));
}

inline void insufficient(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::insufficient_spec(), opt);
  const auto independent = make_world(worlds::independent_spec(), opt);
  rep.add_table("cmi", cmi_by_position(world));
  const double c0 = conditional_mutual_information(world, 0).value_bits;
  rep.check("cmi-is-one-bit", std::abs(c0 - 1.0) <= kExactTolerance, "t=0: " + fmt(c0));
  double later = 0.0, indep = 0.0;
  for (std::size_t t = 1; t < world.horizon(); ++t)
    later = std::max(later, std::abs(conditional_mutual_information(world, t).value_bits));
  for (std::size_t t = 0; t < independent.horizon(); ++t)
    indep = std::max(indep, std::abs(conditional_mutual_information(independent, t).value_bits));
  rep.check("first-token-reveals-z", later <= kExactTolerance, "max |cmi| for t>=1 = " + fmt(later));
  rep.check("independent-variant-is-zero", indep <= kExactTolerance, "max |cmi| = " + fmt(indep));

  // Irreducible regret: even the exact marginal model pays the CMI.
  const auto exact = exact_marginal_model(world);
  double gap = 0.0;
  for (std::size_t t = 0; t < world.horizon(); ++t)
    gap = std::max(gap, std::abs(expected_full_kl(world, exact, t) - conditional_mutual_information(world, t).value_bits));
  rep.check("exact-marginal-regret-equals-cmi", gap <= kExactTolerance, "max gap = " + fmt(gap));

  const double floor = mean_cmi(world);
  CsvTable regret{{"n_transitions", "median_full_kl_bits", "mean_cmi_bits"}, {}};
  bool above_floor = true;
  double excess_at_max = 0.0;
  for (std::size_t i = 0; i < convergence_grid().size(); ++i) {
    const std::size_t N = convergence_grid()[i];
    std::vector<double> kls;
    for (auto seed : opt.seeds) {
      Rng rng = seeded(seed, 200 + i);
      const auto m = fit_tabular(sample_corpus(world, sequences_for(world, N), rng), world, world.horizon() - 1, 0.0);
      kls.push_back(mean_full_kl(world, m));
      above_floor = above_floor && kls.back() >= floor - kExactTolerance;
    }
    regret.add({std::to_string(N), fmt(median(kls)), fmt(floor)});
    excess_at_max = median(kls) - floor;
  }
  rep.add_table("regret", regret);
  rep.check("trained-regret-never-below-cmi", above_floor);
  rep.check("trained-regret-approaches-cmi", excess_at_max < opt.about_zero_bits,
            "median excess at N=1e5: " + fmt(excess_at_max));
}

inline CsvTable posterior_table(const LatentWorld& world, std::size_t max_len, double& min_h, double& max_h_nonempty) {
  CsvTable t{{"prefix", "probability", "regime_entropy_bits"}, {}};
  for (std::size_t k = 0; k < world.regime_count(); ++k) t.header.push_back("p_regime" + std::to_string(k));
  min_h = INFINITY;
  max_h_nonempty = 0.0;
  for (std::size_t len = 0; len <= max_len; ++len)
    for (const auto& e : enumerate_prefixes(world, len).entries) {
      const auto post = regime_posterior(world, e.prefix);
      const double h = latentlab::detail::entropy_bits(post);
      min_h = std::min(min_h, h);
      if (len > 0) max_h_nonempty = std::max(max_h_nonempty, h);
      std::vector<std::string> row{format_tokens(e.prefix), fmt(e.probability), fmt(h)};
      for (double p : post) row.push_back(fmt(p));
      t.add(std::move(row));
    }
  return t;
}

inline void mixture_identifiable(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::mixture_identifiable_spec(), opt);
  double min_h = 0, max_h = 0;
  rep.add_table("posterior", posterior_table(world, 2, min_h, max_h));
  rep.check("one-token-identifies-regime", max_h <= kExactTolerance,
            "max regime entropy over prefixes of length 1-2 = " + fmt(max_h));
}

inline void mixture_confusable(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::mixture_confusable_spec(), opt);
  double min_h = 0, max_h = 0;
  rep.add_table("posterior", posterior_table(world, 2, min_h, max_h));
  rep.check("posterior-stays-diffuse", min_h > 0.9, "min regime entropy over prefixes of length <= 2 = " + fmt(min_h));
}

inline void rag_helpful(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::insufficient_spec(), opt);
  const auto identity = build_channel(identity_channel_spec(world), world);
  const auto coin = build_channel(coin_flip_channel_spec(world, 0.5), world);
  rep.add_table("cmi", cmi_by_position(world, &identity));

  double worst = 0.0;
  for (std::size_t t = 0; t < world.horizon(); ++t)
    worst = std::max(worst, std::abs(augmented_cmi(world, identity, t).value_bits));
  rep.check("identity-channel-restores-sufficiency", worst <= kExactTolerance, "max augmented cmi = " + fmt(worst));
  const double half = augmented_cmi(world, coin, 0).value_bits;
  rep.check("informative-channel-strictly-lowers-cmi",
            std::abs(half - 0.5) <= kExactTolerance && half < conditional_mutual_information(world, 0).value_bits,
            "coin-flip reveal 0.5 at t=0: " + fmt(half));

  // Informational sufficiency versus model competence.
  CsvTable sep{{"n_transitions", "smoothing", "median_augmented_model_kl_bits", "median_unaugmented_model_kl_bits",
                "unaugmented_unsupported_runs"},
               {}};
  bool unaug_errors = true, unaug_away = true;
  double aug_at_max = 0.0;
  for (double lambda : {0.0, 0.5}) {
    for (std::size_t i = 0; i < convergence_grid().size(); ++i) {
      const std::size_t N = convergence_grid()[i];
      std::vector<double> aug, unaug;
      std::size_t unsupported = 0;
      for (auto seed : opt.seeds) {
        Rng rng = seeded(seed, 300 + i);
        const auto data = augment_corpus(visible(sample_corpus(world, sequences_for(world, N), rng)), identity, rng);
        const auto with = fit_augmented(data, world.vocab_size(), 1, lambda);
        const auto without = fit_tabular(data.corpus, world, 1, lambda);
        aug.push_back(mean_augmented_kl(world, identity, with));
        try {
          (void)model_conditional(without, TokenSequence{}, identity.symbol_id(0));
        } catch (const UnsupportedContextError&) {
          ++unsupported;
        }
        unaug.push_back(mean_augmented_kl(world, identity, without));
        if (lambda > 0.0) unaug_away = unaug_away && unaug.back() > opt.away_from_zero_bits;
      }
      if (lambda == 0.0) unaug_errors = unaug_errors && unsupported == opt.seeds.size();
      if (N == convergence_grid().back()) aug_at_max = std::max(aug_at_max, max_of(aug));
      sep.add({std::to_string(N), fmt(lambda), fmt(median(aug)), fmt(median(unaug)), std::to_string(unsupported)});
    }
  }
  rep.add_table("separation", sep);
  rep.check("augmented-model-converges", aug_at_max < opt.about_zero_bits,
            "worst seed at N=1e5 = " + fmt(aug_at_max));
  rep.check("unaugmented-model-errors-without-smoothing", unaug_errors);
  rep.check("unaugmented-model-stays-away-with-smoothing", unaug_away);
}

inline void rag_useless(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::insufficient_spec(0.9, 4), opt);
  const auto constant = build_channel(constant_channel_spec(world), world);
  ChannelSpec noise;
  noise.name = "noise";
  noise.reads_latent = false;
  noise.symbols = {static_cast<int>(world.vocab_size()), static_cast<int>(world.vocab_size() + 1)};
  noise.readout = {{std::nullopt, std::nullopt, std::nullopt, {0.3, 0.7}}};
  const auto random_doc = build_channel(noise, world);
  rep.add_table("cmi", cmi_by_position(world, &constant));
  double gap = 0.0;
  for (std::size_t t = 0; t < world.horizon(); ++t) {
    const double plain = conditional_mutual_information(world, t).value_bits;
    gap = std::max({gap, std::abs(augmented_cmi(world, constant, t).value_bits - plain),
                    std::abs(augmented_cmi(world, random_doc, t).value_bits - plain)});
  }
  rep.check("latent-blind-channels-change-nothing", gap <= kExactTolerance, "max |augmented - plain| = " + fmt(gap));
}

inline void tool_state(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::insufficient_spec(0.9, 4), opt);
  const auto prefix_tool = build_channel(
      prefix_tool_spec(world, 1, 2, [](const TokenSequence& c) { return c[0] == 1 ? 1 : 0; }), world);
  const auto state_tool = build_channel(identity_channel_spec(world, ChannelKind::Tool), world);
  CsvTable t{{"t", "cmi_bits", "prefix_tool_cmi_bits", "state_tool_cmi_bits"}, {}};
  double prefix_gap = 0.0, state_max = 0.0;
  for (std::size_t pos = 0; pos < world.horizon(); ++pos) {
    const double plain = conditional_mutual_information(world, pos).value_bits;
    const double p = augmented_cmi(world, prefix_tool, pos).value_bits;
    const double s = augmented_cmi(world, state_tool, pos).value_bits;
    prefix_gap = std::max(prefix_gap, std::abs(p - plain));
    state_max = std::max(state_max, std::abs(s));
    t.add({std::to_string(pos), fmt(plain), fmt(p), fmt(s)});
  }
  rep.add_table("cmi", t);
  rep.check("prefix-function-tool-adds-nothing", prefix_gap <= kExactTolerance, "max gap = " + fmt(prefix_gap));
  rep.check("state-reading-tool-restores-sufficiency", state_max <= kExactTolerance, "max = " + fmt(state_max));
}

inline void drift(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto phase_a = make_world(worlds::phase_spec(0.8), opt);
  const auto phase_b = make_world(worlds::phase_spec(0.2), opt);
  const auto blend = make_world(worlds::blend_spec(0.8, 0.2), opt);
  CsvTable t{{"n_transitions", "median_kl_phase_a_bits", "median_kl_phase_b_bits", "median_kl_blend_bits",
              "min_kl_phase_bits"},
             {}};
  std::vector<double> blend_medians;
  double phase_min = INFINITY;
  for (std::size_t i = 0; i < convergence_grid().size(); ++i) {
    const std::size_t N = convergence_grid()[i];
    std::vector<double> ka, kb, kbl;
    for (auto seed : opt.seeds) {
      Rng rng = seeded(seed, 400 + i);
      const std::size_t half = std::max<std::size_t>(1, sequences_for(blend, N) / 2);
      const Corpus archive = concatenate(sample_corpus(phase_a, half, rng), sample_corpus(phase_b, half, rng));
      const auto m = fit_tabular(archive, blend, blend.horizon() - 1, 0.5);
      ka.push_back(mean_model_kl(phase_a, m));
      kb.push_back(mean_model_kl(phase_b, m));
      kbl.push_back(mean_model_kl(blend, m));
    }
    const double lo = std::min(min_of(ka), min_of(kb));
    phase_min = std::min(phase_min, lo);
    blend_medians.push_back(median(kbl));
    t.add({std::to_string(N), fmt(median(ka)), fmt(median(kb)), fmt(blend_medians.back()), fmt(lo)});
  }
  rep.add_table("drift", t);
  rep.check("phase-kl-bounded-below", phase_min > 0.05, "min over N, seeds and phases = " + fmt(phase_min));
  rep.check("blend-kl-decreases", strictly_decreasing_except_last(blend_medians), join(blend_medians));
}

inline void prompt_unsupported(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::insufficient_spec(), opt);
  ChannelSpec spec = identity_channel_spec(world);
  spec.name = "prompt";
  spec.inference_only = true;
  const auto prompt = build_channel(spec, world);
  CsvTable t{{"n_transitions", "unsupported_runs_unsmoothed", "median_prompted_kl_smoothed_bits",
              "median_unprompted_full_kl_bits"},
             {}};
  bool always_unsupported = true;
  std::vector<double> prompted;
  for (std::size_t i = 0; i < convergence_grid().size(); ++i) {
    const std::size_t N = convergence_grid()[i];
    std::size_t unsupported = 0;
    std::vector<double> kl, plain;
    for (auto seed : opt.seeds) {
      Rng rng = seeded(seed, 500 + i);
      const auto data = augment_corpus(visible(sample_corpus(world, sequences_for(world, N), rng)), prompt, rng);
      const auto bare = fit_augmented(data, world.vocab_size(), 1, 0.0);
      try {
        (void)decode_step(bare, DecodingPolicy::argmax(), TokenSequence{}, rng, prompt.symbol_id(1));
      } catch (const UnsupportedContextError&) {
        ++unsupported;
      }
      const auto smoothed = fit_augmented(data, world.vocab_size(), 1, 0.5);
      kl.push_back(mean_augmented_kl(world, prompt, smoothed));
      plain.push_back(mean_full_kl(world, smoothed));
    }
    always_unsupported = always_unsupported && unsupported == opt.seeds.size();
    prompted.push_back(median(kl));
    t.add({std::to_string(N), std::to_string(unsupported), fmt(prompted.back()), fmt(median(plain))});
  }
  rep.add_table("prompt", t);
  rep.check("prompted-query-is-unsupported", always_unsupported);
  rep.check("prompted-kl-does-not-improve-with-n",
            prompted.back() >= prompted.front() - kExactTolerance && min_of(prompted) > opt.away_from_zero_bits,
            join(prompted));
}

struct CollapseRun {
  std::string label;
  std::vector<GenerationTrace> traces;
};

inline CsvTable median_trace_table(const std::vector<CollapseRun>& runs) {
  CsvTable t{{"run", "generation", "median_kl_bits", "median_entropy_bits", "median_support_size",
              "median_tail_mass"},
             {}};
  for (const auto& run : runs) {
    const std::size_t G = run.traces.front().records.size();
    for (std::size_t n = 0; n < G; ++n) {
      std::vector<double> kl, h, sup, tail;
      for (const auto& tr : run.traces) {
        kl.push_back(tr.records[n].kl_bits);
        h.push_back(tr.records[n].mean_entropy_bits);
        sup.push_back(static_cast<double>(tr.records[n].support_size));
        tail.push_back(tr.records[n].tail_mass);
      }
      t.add({run.label, std::to_string(n), fmt(median(kl)), fmt(median(h)), fmt(median(sup)), fmt(median(tail))});
    }
  }
  return t;
}

inline std::vector<double> median_series(const CollapseRun& run, double GenerationRecord::*field) {
  std::vector<double> out;
  for (std::size_t n = 0; n < run.traces.front().records.size(); ++n) {
    std::vector<double> v;
    for (const auto& tr : run.traces) v.push_back(tr.records[n].*field);
    out.push_back(median(v));
  }
  return out;
}

inline void collapse(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::collapse_spec(), opt);
  const std::size_t per_generation = 500;
  auto schedule = [&](double alpha, double lambda, DecodingPolicy decoding) {
    auto s = ContaminationSchedule::with_alpha(alpha, per_generation);
    s.generations = 10;
    s.order = world.horizon() - 1;
    s.smoothing = lambda;
    s.decoding = decoding;
    s.heldout_sequences = 200;
    return s;
  };
  auto run = [&](const std::string& label, const ContaminationSchedule& s, std::uint64_t stream,
                 const std::optional<TabularModel>& initial = std::nullopt) {
    CollapseRun r{label, {}};
    for (auto seed : opt.seeds) {
      Rng rng = seeded(seed, stream);
      r.traces.push_back(run_generations(world, s, rng, initial));
    }
    return r;
  };

  const auto greedy = run("alpha=1 greedy lambda=0", schedule(1.0, 0.0, DecodingPolicy::argmax()), 600);
  const auto sampled = run("alpha=1 T=1 lambda=0", schedule(1.0, 0.0, DecodingPolicy::sample(1.0)), 601);
  const auto control = run("alpha=0 T=1 lambda=0.1", schedule(0.0, 0.1, DecodingPolicy::sample(1.0)), 602);
  const auto half = run("alpha=0.5 T=1 lambda=0.1", schedule(0.5, 0.1, DecodingPolicy::sample(1.0)), 603);
  const auto full = run("alpha=1 T=1 lambda=0.1", schedule(1.0, 0.1, DecodingPolicy::sample(1.0)), 604);
  auto near = ContaminationSchedule::with_alpha(1.0, 20000);
  near.generations = 5;
  near.order = world.horizon() - 1;
  near.smoothing = 0.01;
  near.heldout_sequences = 0;
  const auto fixed_point = run("near-fixed-point", near, 605, exact_marginal_model(world, 0.01));

  rep.add_table("generations", median_trace_table({greedy, sampled, control, half, full, fixed_point}));

  bool support_monotone = true;
  for (const auto& tr : greedy.traces)
    for (std::size_t n = 1; n < tr.records.size(); ++n)
      support_monotone = support_monotone && tr.records[n].support_size <= tr.records[n - 1].support_size;
  rep.check("greedy-support-non-increasing", support_monotone, "every generation, every seed");
  const auto greedy_h = median_series(greedy, &GenerationRecord::mean_entropy_bits);
  rep.check("greedy-entropy-does-not-grow", greedy_h.back() <= greedy_h.front(),
            "median entropy " + fmt(greedy_h.front()) + " -> " + fmt(greedy_h.back()));

  const auto tail = median_series(sampled, &GenerationRecord::tail_mass);
  bool tail_monotone = true;
  for (std::size_t n = 1; n < tail.size(); ++n) tail_monotone = tail_monotone && tail[n] >= tail[n - 1];
  rep.check("tail-mass-non-decreasing", tail_monotone, join(tail));

  const auto control_kl = median_series(control, &GenerationRecord::kl_bits);
  rep.check("alpha0-control-no-kl-growth", control_kl.back() <= 2.0 * control_kl[1],
            "median kl gen1 " + fmt(control_kl[1]) + ", gen10 " + fmt(control_kl.back()));

  const double kl_half = median_series(half, &GenerationRecord::kl_bits).back();
  const double kl_full = median_series(full, &GenerationRecord::kl_bits).back();
  rep.check("fresh-data-rescue", kl_half < kl_full, "median gen-10 kl alpha=0.5 " + fmt(kl_half) + " vs alpha=1 " +
                                                        fmt(kl_full));
  rep.check("alpha-ordering", control_kl.back() <= kl_half && kl_half <= kl_full,
            fmt(control_kl.back()) + " <= " + fmt(kl_half) + " <= " + fmt(kl_full));

  double worst_fixed = 0.0;
  for (const auto& tr : fixed_point.traces)
    for (const auto& r : tr.records) worst_fixed = std::max(worst_fixed, r.kl_bits);
  rep.check("near-fixed-point-stays-close", worst_fixed < 0.05, "max kl over 5 generations = " + fmt(worst_fixed));
}

inline ChannelSpec random_channel_spec(const LatentWorld& world, Rng& rng, std::size_t variant) {
  ChannelSpec spec;
  spec.name = "random";
  const std::size_t S = 2 + variant % 3;
  for (std::size_t s = 0; s < S; ++s) spec.symbols.push_back(static_cast<int>(world.vocab_size() + s));
  spec.reads_latent = variant % 4 != 3;
  spec.context_order = variant % 2;
  auto row = [&] { return worlds::detail::random_row(S, 0.3, rng); };
  if (!spec.reads_latent) {
    spec.readout.push_back({std::nullopt, std::nullopt, std::nullopt, row()});
    if (spec.context_order == 1)
      for (std::size_t v = 0; v < world.vocab_size(); ++v)
        spec.readout.push_back({std::nullopt, std::nullopt, TokenSequence{static_cast<Token>(v)}, row()});
    return spec;
  }
  for (std::size_t k = 0; k < world.regime_count(); ++k)
    for (std::size_t z = 0; z < world.regime(k).latent_size(); ++z) {
      spec.readout.push_back({k, z, std::nullopt, row()});
      if (spec.context_order == 1)
        for (std::size_t v = 0; v < world.vocab_size(); ++v)
          spec.readout.push_back({k, z, TokenSequence{static_cast<Token>(v)}, row()});
    }
  return spec;
}

inline void identities(const ScenarioOptions& opt, ExperimentReport& rep) {
  const std::uint64_t base = opt.seeds.empty() ? 1 : opt.seeds.front();
  Rng rng = seeded(base, 700);
  CsvTable t{{"world", "vocab", "horizon", "order", "regimes", "slots", "max_oracle_err", "min_cmi_bits",
              "max_form_gap", "max_regret_gap", "max_identity_cmi", "max_constant_gap", "max_channel_excess"},
             {}};
  double oracle_err = 0, min_cmi = INFINITY, form_gap = 0, regret_gap = 0, identity_max = 0, constant_gap = 0,
         excess = -INFINITY;
  for (std::size_t w = 0; w < 100; ++w) {
    auto spec = worlds::random_world_spec(rng);
    if (opt.budget) spec.enumeration_budget = *opt.budget;
    const auto world = build_world(spec);
    const oracle::PathOracle paths(world);
    const auto exact = exact_marginal_model(world);
    const auto identity = build_channel(identity_channel_spec(world), world);
    const auto constant = build_channel(constant_channel_spec(world), world);
    std::vector<AugmentationChannel> randoms;
    for (std::size_t v = 0; v < 4; ++v) randoms.push_back(build_channel(random_channel_spec(world, rng, w + v), world));

    double w_oracle = 0, w_min = INFINITY, w_form = 0, w_regret = 0, w_ident = 0, w_const = 0, w_excess = -INFINITY;
    for (std::size_t pos = 0; pos < world.horizon(); ++pos) {
      for (const auto& prefix : paths.prefixes(pos)) {
        const auto ref = paths.conditional(prefix);
        const auto marg = marginal_conditional(world, prefix);
        const auto mix = mixture_conditional(world, prefix);
        for (std::size_t v = 0; v < ref.size(); ++v)
          w_oracle = std::max({w_oracle, std::abs(marg[v] - ref[v]), std::abs(mix[v] - ref[v])});
      }
      const auto r = conditional_mutual_information(world, pos);
      w_min = std::min(w_min, r.value_bits);
      w_form = std::max(w_form, std::abs(r.value_bits - r.entropy_difference()));
      w_regret = std::max({w_regret, std::abs(paths.regret_bits(pos) - r.value_bits),
                           std::abs(expected_full_kl(world, exact, pos) - r.value_bits)});
      w_ident = std::max(w_ident, std::abs(augmented_cmi(world, identity, pos).value_bits));
      w_const = std::max(w_const, std::abs(augmented_cmi(world, constant, pos).value_bits - r.value_bits));
      for (const auto& ch : randoms) w_excess = std::max(w_excess, augmented_cmi(world, ch, pos).value_bits - r.value_bits);
    }
    std::size_t slots = 0;
    for (std::size_t k = 0; k < world.regime_count(); ++k) slots += world.regime(k).latent_size();
    t.add({std::to_string(w), std::to_string(world.vocab_size()), std::to_string(world.horizon()),
           std::to_string(world.context_order()), std::to_string(world.regime_count()), std::to_string(slots),
           fmt(w_oracle), fmt(w_min), fmt(w_form), fmt(w_regret), fmt(w_ident), fmt(w_const), fmt(w_excess)});
    oracle_err = std::max(oracle_err, w_oracle);
    min_cmi = std::min(min_cmi, w_min);
    form_gap = std::max(form_gap, w_form);
    regret_gap = std::max(regret_gap, w_regret);
    identity_max = std::max(identity_max, w_ident);
    constant_gap = std::max(constant_gap, w_const);
    excess = std::max(excess, w_excess);
  }
  rep.add_table("worlds", t);
  rep.check("oracle-equivalence", oracle_err <= kExactTolerance, "max error = " + fmt(oracle_err));
  rep.check("cmi-non-negative", min_cmi >= -kExactTolerance, "min = " + fmt(min_cmi));
  rep.check("cmi-two-forms-agree", form_gap <= kExactTolerance, "max gap = " + fmt(form_gap));

  const auto insufficient_world = make_world(worlds::insufficient_spec(), opt);
  const auto independent_world = make_world(worlds::independent_spec(), opt);
  const double one = conditional_mutual_information(insufficient_world, 0).value_bits;
  double zero = 0.0;
  for (std::size_t pos = 0; pos < independent_world.horizon(); ++pos)
    zero = std::max(zero, std::abs(conditional_mutual_information(independent_world, pos).value_bits));
  rep.check("insufficient-world-one-bit", std::abs(one - 1.0) <= kExactTolerance, fmt(one));
  rep.check("independent-world-zero", zero <= kExactTolerance, fmt(zero));

  rep.check("regret-equals-cmi", regret_gap <= kExactTolerance, "max gap = " + fmt(regret_gap));
  rep.check("identity-channel-zero", identity_max <= kExactTolerance, "max = " + fmt(identity_max));
  rep.check("constant-channel-unchanged", constant_gap <= kExactTolerance, "max gap = " + fmt(constant_gap));
  rep.check("channels-never-increase-cmi", excess <= kExactTolerance, "max excess = " + fmt(excess));
}

inline void temperature(const ScenarioOptions& opt, ExperimentReport& rep) {
  const std::vector<double> grid{0.25, 0.5, 1.0, 2.0, 4.0};
  const auto world = make_world(worlds::collapse_spec(), opt);
  Rng rng = seeded(opt.seeds.empty() ? 1 : opt.seeds.front(), 800);
  const auto model = fit_tabular(sample_corpus(world, 300, rng), world, 1, 0.5);
  std::vector<TokenDistribution> rows;
  for (const auto& [key, counts] : model.rows()) rows.push_back(model.conditional(key));
  for (int i = 0; i < 200; ++i) rows.emplace_back(worlds::detail::random_row(2 + i % 5, 0.3, rng));

  double identity_err = 0.0;
  bool monotone = true, argmax_stable = true;
  std::vector<double> mean_h(grid.size(), 0.0);
  for (const auto& p : rows) {
    const auto same = apply_temperature(p, 1.0);
    for (std::size_t i = 0; i < p.size(); ++i) identity_err = std::max(identity_err, std::abs(same[i] - p[i]));
    double last = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto q = apply_temperature(p, grid[g]);
      const double h = entropy(q);
      monotone = monotone && h >= last - kExactTolerance;
      last = h;
      argmax_stable = argmax_stable && q.argmax() == p.argmax();
      mean_h[g] += h / static_cast<double>(rows.size());
    }
  }
  CsvTable t{{"temperature", "mean_entropy_bits"}, {}};
  for (std::size_t g = 0; g < grid.size(); ++g) t.add({fmt(grid[g]), fmt(mean_h[g])});
  rep.add_table("entropy", t);
  rep.check("unit-temperature-is-identity", identity_err <= kExactTolerance, "max error = " + fmt(identity_err));
  rep.check("entropy-non-decreasing-in-t", monotone, std::to_string(rows.size()) + " distributions");
  rep.check("argmax-invariant", argmax_stable);
}

inline void convergence(const ScenarioOptions& opt, ExperimentReport& rep) {
  const auto world = make_world(worlds::noisy_latent_spec(), opt);
  CsvTable t{{"n_transitions", "median_model_kl_bits", "min_model_kl_bits", "max_model_kl_bits"}, {}};
  std::vector<double> medians;
  for (std::size_t i = 0; i < convergence_grid().size(); ++i) {
    const std::size_t N = convergence_grid()[i];
    std::vector<double> kls;
    for (auto seed : opt.seeds) {
      Rng rng = seeded(seed, 900 + i);
      const auto m = fit_tabular(sample_corpus(world, sequences_for(world, N), rng), world, world.horizon() - 1, 0.5);
      kls.push_back(mean_model_kl(world, m));
    }
    medians.push_back(median(kls));
    t.add({std::to_string(N), fmt(medians.back()), fmt(min_of(kls)), fmt(max_of(kls))});
  }
  rep.add_table("convergence", t);
  rep.check("median-kl-decreasing-in-n", strictly_decreasing_except_last(medians), join(medians));
}

} // namespace detail

inline const std::vector<Scenario>& scenario_library();

/// Runs one scenario; throws ConfigError for unknown names.
inline ExperimentReport run_scenario(const std::string& name, const ScenarioOptions& options = default_options()) {
  if (options.seeds.empty()) throw ConfigError("scenario needs at least one seed");
  for (const auto& s : scenario_library()) {
    if (s.name != name) continue;
    ExperimentReport rep;
    rep.scenario = name;
    rep.seeds = options.seeds;
    const auto start = std::chrono::steady_clock::now();
    s.run(options, rep);
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
  }
  std::string known;
  for (const auto& s : scenario_library()) known += (known.empty() ? "" : ", ") + s.name;
  throw ConfigError("unknown scenario \"" + name + "\" (known: " + known + ")");
}

/// Runs several scenarios concurrently; reports come back in input order.
inline std::vector<ExperimentReport> run_scenarios(const std::vector<std::string>& names,
                                                   const ScenarioOptions& options = default_options(),
                                                   std::size_t threads = 0) {
  std::vector<ExperimentReport> out(names.size());
  parallel_for(names.size(), [&](std::size_t i) { out[i] = run_scenario(names[i], options); }, threads);
  return out;
}

inline std::vector<std::string> scenario_names() {
  std::vector<std::string> names;
  for (const auto& s : scenario_library()) names.push_back(s.name);
  return names;
}

namespace detail {

inline void determinism(const ScenarioOptions& opt, ExperimentReport& rep) {
  auto csv_of = [](const ExperimentReport& r) {
    std::string all = r.checks_table().to_string();
    for (const auto& t : r.tables) all += t.name + "\n" + t.table.to_string();
    return all;
  };
  ScenarioOptions small = opt;
  small.seeds.resize(std::min<std::size_t>(small.seeds.size(), 5));
  bool same = true;
  for (const char* name : {"convergence", "drift", "insufficient"})
    same = same && csv_of(run_scenario(name, small)) == csv_of(run_scenario(name, small));
  rep.check("rerun-csv-byte-identical", same, "convergence, drift, insufficient");

  const auto world = make_world(worlds::collapse_spec(), opt);
  bool corpora_same = true, seeds_matter = false;
  for (auto seed : opt.seeds) {
    Rng a = seeded(seed, 1000), b = seeded(seed, 1000), c = seeded(seed + 1000003, 1000);
    const auto x = corpus_table(sample_corpus(world, 50, a)).to_string();
    corpora_same = corpora_same && x == corpus_table(sample_corpus(world, 50, b)).to_string();
    seeds_matter = seeds_matter || x != corpus_table(sample_corpus(world, 50, c)).to_string();
  }
  rep.check("same-seed-same-corpus", corpora_same);
  rep.check("different-seeds-differ", seeds_matter);

  bool round_trip = true;
  CsvTable t{{"model", "rows", "dump_bytes", "round_trip"}, {}};
  const auto island = make_world(worlds::sufficient_island_spec(), opt);
  const auto identity = build_channel(identity_channel_spec(island), island);
  Rng rng = seeded(opt.seeds.front(), 1001);
  std::vector<std::pair<std::string, TabularModel>> models{
      {"order1-lambda0", fit_tabular(sample_corpus(world, 200, rng), world, 1, 0.0)},
      {"order3-lambda0.3", fit_tabular(sample_corpus(world, 200, rng), world, 3, 0.3)},
      {"exact-marginal", exact_marginal_model(island)},
      {"augmented",
       fit_augmented(augment_corpus(visible(sample_corpus(island, 200, rng)), identity, rng), 3, 2, 1.0 / 3.0)}};
  for (const auto& [label, m] : models) {
    const std::string text = dump_model(m);
    const auto back = load_model_text(text);
    const bool ok = back == m && dump_model(back) == text;
    round_trip = round_trip && ok;
    t.add({label, std::to_string(m.rows().size()), std::to_string(text.size()), ok ? "1" : "0"});
  }
  rep.add_table("models", t);
  rep.check("model-dump-round-trip-bit-exact", round_trip);
}

} // namespace detail

inline const std::vector<Scenario>& scenario_library() {
  static const std::vector<Scenario> lib{
      {"identities", "oracle equivalence, CMI identities, regret = CMI, channel inequalities on 100 random worlds",
       detail::identities},
      {"sufficient-island", "first token reveals z in regime 0; regime CMI about zero afterwards",
       detail::sufficient_island},
      {"insufficient", "z uniform and every token equals z; one bit of irreducible regret", detail::insufficient},
      {"mixture-identifiable", "disjoint regime supports; one token identifies the regime",
       detail::mixture_identifiable},
      {"mixture-confusable", "overlapping regimes; the posterior stays diffuse", detail::mixture_confusable},
      {"rag-helpful", "identity channel restores sufficiency; trained models need augmented data",
       detail::rag_helpful},
      {"rag-useless", "latent-blind channels leave CMI unchanged", detail::rag_useless},
      {"tool-state", "prefix-function tool versus state-reading tool", detail::tool_state},
      {"drift", "concatenated phases; the model fits the blend", detail::drift},
      {"prompt-unsupported", "inference-only channel: unsupported contexts, no gain with N",
       detail::prompt_unsupported},
      {"temperature", "temperature transform: identity at T=1, entropy monotone, argmax fixed", detail::temperature},
      {"convergence", "stationary world: model KL decreases with N", detail::convergence},
      {"collapse", "contamination recursion: support, tails, fresh-data rescue", detail::collapse},
      {"determinism", "byte-identical reruns and bit-exact model dumps", detail::determinism},
  };
  return lib;
}

} // namespace latentlab::lab
