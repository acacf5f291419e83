#include <gtest/gtest.h>

#include <set>

#include "latentlab/dynamics.hpp"
#include "latentlab/lab/worlds.hpp"

namespace latentlab {
namespace {

std::set<std::pair<ContextKey, std::size_t>> transitions_of(const TabularModel& m) {
  std::set<std::pair<ContextKey, std::size_t>> out;
  for (const auto& [key, row] : m.rows())
    for (std::size_t v = 0; v < row.size(); ++v)
      if (row[v] > 0.0) out.insert({key, v});
  return out;
}

TEST(Schedule, WithAlphaSplitsCounts) {
  const auto s = ContaminationSchedule::with_alpha(0.5, 500);
  EXPECT_EQ(s.fresh_per_generation, 250u);
  EXPECT_EQ(s.synthetic_per_generation, 250u);
  EXPECT_NO_THROW(s.validate());
  const auto all = ContaminationSchedule::with_alpha(1.0, 7);
  EXPECT_EQ(all.fresh_per_generation, 0u);
  EXPECT_EQ(all.synthetic_per_generation, 7u);
}

TEST(Schedule, RejectsInconsistentCounts) {
  auto s = ContaminationSchedule::with_alpha(0.5, 100);
  s.synthetic_per_generation = 90;
  EXPECT_THROW(s.validate(), ConfigError);
  s = ContaminationSchedule::with_alpha(0.5, 100);
  s.alpha = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = ContaminationSchedule::with_alpha(0.5, 100);
  s.generations = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(ContaminationSchedule::with_alpha(0.0, 0).validate(), ConfigError);
}

TEST(GenerationMetrics, TrueMarginalModel) {
  const auto world = build_world(worlds::collapse_spec());
  const auto rec = generation_metrics(exact_marginal_model(world), world);
  EXPECT_NEAR(rec.kl_bits, 0.0, 1e-12);
  EXPECT_EQ(rec.tail_mass, 0.0);
  EXPECT_TRUE(std::isnan(rec.heldout_ce_bits));
}

TEST(GenerationMetrics, PointMassModel) {
  const auto world = build_world(worlds::uniform_spec(2, 3, 1));
  TabularModel m(2, 1, 0.0);
  m.set_row(m.key_for(TokenSequence{}), {0.0, 4.0});
  m.set_row(m.key_for(TokenSequence{1}), {3.0, 0.0});
  m.set_row(m.key_for(TokenSequence{0}), {0.0, 1.0});
  const auto rec = generation_metrics(m, world);
  EXPECT_EQ(rec.mean_entropy_bits, 0.0);
  EXPECT_EQ(rec.support_size, 3u);
  EXPECT_TRUE(std::isinf(rec.kl_bits));
  // Half the true next-token mass lands on zero-probability tokens at every position.
  EXPECT_DOUBLE_EQ(rec.tail_mass, 0.5);
}

TEST(GenerationMetrics, UniformSmoothedModelOnBinaryVocabulary) {
  const auto world = build_world(worlds::uniform_spec(2, 3, 1));
  const TabularModel m(2, 1, 1.0);
  const auto rec = generation_metrics(m, world);
  EXPECT_DOUBLE_EQ(rec.mean_entropy_bits, 1.0);
  EXPECT_EQ(rec.support_size, 0u);
  EXPECT_NEAR(rec.kl_bits, 0.0, 1e-12);
}

TEST(RunGenerations, OneRecordPerGenerationAndDeterministic) {
  const auto world = build_world(worlds::collapse_spec());
  auto s = ContaminationSchedule::with_alpha(0.5, 100);
  s.generations = 4;
  s.smoothing = 0.1;
  Rng a(3), b(3);
  const auto x = run_generations(world, s, a);
  const auto y = run_generations(world, s, b);
  ASSERT_EQ(x.records.size(), 5u);
  ASSERT_EQ(x.models.size(), 5u);
  for (std::size_t n = 0; n < 5; ++n) EXPECT_EQ(x.records[n].generation, n);
  EXPECT_EQ(x.table().to_string(), y.table().to_string());
  EXPECT_EQ(x.table().header,
            (std::vector<std::string>{"generation", "kl_bits", "mean_entropy_bits", "support_size", "tail_mass",
                                      "heldout_ce_bits"}));
  EXPECT_FALSE(std::isnan(x.records[0].heldout_ce_bits));
}

TEST(RunGenerations, GenerationZeroIsPureRealData) {
  const auto world = build_world(worlds::collapse_spec());
  auto s = ContaminationSchedule::with_alpha(1.0, 60);
  s.generations = 1;
  s.heldout_sequences = 10;
  Rng a(8), b(8);
  const auto trace = run_generations(world, s, a);
  sample_corpus(world, 10, b); // held-out set comes first
  EXPECT_EQ(trace.models[0], fit_tabular(sample_corpus(world, 60, b), world, 1, 0.0));
}

TEST(RunGenerations, SyntheticSupportShrinksUnderFullContamination) {
  // alpha = 1, lambda = 0: every transition of model n+1 was emitted by model n.
  const auto world = build_world(worlds::collapse_spec());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto s = ContaminationSchedule::with_alpha(1.0, 200);
    s.generations = 6;
    Rng rng(seed);
    const auto trace = run_generations(world, s, rng);
    for (std::size_t n = 1; n < trace.models.size(); ++n) {
      const auto before = transitions_of(trace.models[n - 1]);
      for (const auto& tr : transitions_of(trace.models[n])) EXPECT_TRUE(before.count(tr)) << format_key(tr.first);
    }
  }
}

TEST(RunGenerations, GreedySupportIsNonIncreasing) {
  const auto world = build_world(worlds::collapse_spec());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto s = ContaminationSchedule::with_alpha(1.0, 300);
    s.decoding = DecodingPolicy::argmax();
    s.order = world.horizon() - 1;
    Rng rng(seed);
    const auto trace = run_generations(world, s, rng);
    for (std::size_t n = 1; n < trace.records.size(); ++n)
      EXPECT_LE(trace.records[n].support_size, trace.records[n - 1].support_size);
    EXPECT_LE(trace.records.back().mean_entropy_bits, trace.records.front().mean_entropy_bits);
  }
}

TEST(RunGenerations, UnsupportedContextsAreResampledAndLogged) {
  const auto world = build_world(worlds::collapse_spec());
  TabularModel initial(3, 1, 0.0);
  initial.set_row(initial.key_for(TokenSequence{}), {1.0, 0.0, 1.0});
  initial.set_row(initial.key_for(TokenSequence{0}), {1.0, 0.0, 0.0});
  auto s = ContaminationSchedule::with_alpha(1.0, 50);
  s.generations = 1;
  Rng rng(12);
  const auto trace = run_generations(world, s, rng, initial);
  ASSERT_FALSE(trace.events.empty());
  EXPECT_EQ(trace.events[0].generation, 1u);
  EXPECT_GT(trace.events[0].retries, 0u);
  // Only the all-zero path survives.
  EXPECT_EQ(trace.models[1].rows().size(), 2u);

  TabularModel dead_end(3, 1, 0.0);
  dead_end.set_row(dead_end.key_for(TokenSequence{}), {0.0, 0.0, 1.0});
  Rng rng2(1);
  EXPECT_THROW(run_generations(world, s, rng2, dead_end), Error);
}

} // namespace
} // namespace latentlab
