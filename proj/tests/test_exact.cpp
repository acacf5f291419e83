#include <gtest/gtest.h>

#include <sstream>

#include "latentlab/exact.hpp"
#include "latentlab/lab/path_oracle.hpp"
#include "latentlab/lab/random_world.hpp"
#include "latentlab/lab/worlds.hpp"

namespace latentlab {
namespace {

// Two-latent binary world: p(x=1 | z=1) = hi, p(x=1 | z=0) = lo, z uniform.
LatentWorld two_latent_world(double lo, double hi, std::size_t horizon = 3) {
  WorldSpec s = worlds::insufficient_spec(1.0, horizon);
  s.regimes[0].emission = {{0, std::nullopt, {1.0 - lo, lo}}, {1, std::nullopt, {1.0 - hi, hi}}};
  return build_world(s);
}

TEST(FilterPosterior, EmptyPrefixRecoversPrior) {
  const auto world = build_world(worlds::sufficient_island_spec());
  const auto post = filter_posterior(world, TokenSequence{});
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t z = 0; z < 2; ++z) EXPECT_DOUBLE_EQ(post.joint[k][z], 0.25);
}

TEST(FilterPosterior, DisjointSupportsIdentifyRegime) {
  const auto world = build_world(worlds::mixture_identifiable_spec());
  const auto rp = regime_posterior(world, TokenSequence{1, 0});
  EXPECT_EQ(rp[0], 1.0);
  EXPECT_EQ(rp[1], 0.0);
}

TEST(FilterPosterior, TwoLineBayes) {
  // P(z=1 | x=1) = 0.5*0.9 / (0.5*0.9 + 0.5*0.1) = 0.9
  const auto world = two_latent_world(0.1, 0.9);
  EXPECT_NEAR(filter_posterior(world, TokenSequence{1}).joint[0][1], 0.9, 1e-15);
}

TEST(FilterPosterior, ZeroSupportPrefixIsLoud) {
  const auto world = build_world(worlds::insufficient_spec());
  EXPECT_THROW(filter_posterior(world, TokenSequence{0, 1}), ZeroSupportError);
  EXPECT_THROW(marginal_conditional(world, TokenSequence{1, 0}), ZeroSupportError);
  EXPECT_THROW(regime_posterior(world, TokenSequence{1, 0}), ZeroSupportError);
  EXPECT_THROW(mixture_conditional(world, TokenSequence{1, 0}), ZeroSupportError);
}

TEST(FilterPosterior, TokenByTokenEqualsBatch) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto world = build_world(worlds::random_world_spec(rng));
    // Grow a positive-probability prefix by sampling.
    const auto sample = sample_sequence(world, rng);
    FilterState state(world);
    for (std::size_t t = 0; t < sample.tokens.size(); ++t) {
      state.observe(sample.tokens[t]);
      const auto batch = filter_posterior(world, std::span(sample.tokens).first(t + 1));
      for (std::size_t k = 0; k < batch.joint.size(); ++k)
        for (std::size_t z = 0; z < batch.joint[k].size(); ++z)
          EXPECT_NEAR(state.posterior().joint[k][z], batch.joint[k][z], 1e-12);
      EXPECT_NEAR(state.prefix_probability(), total_weight(forward_weights(world, state.prefix())), 1e-15);
    }
  }
}

TEST(MarginalConditional, DegenerateLatentEqualsFullConditional) {
  const auto world = build_world(worlds::phase_spec(0.3));
  const auto d = marginal_conditional(world, TokenSequence{1, 0});
  EXPECT_DOUBLE_EQ(d[0], full_conditional(world, 0, 0, TokenSequence{1, 0})[0]);
}

TEST(MarginalConditional, AveragesOverUninformativePrior) {
  const auto world = two_latent_world(0.2, 0.6);
  EXPECT_NEAR(marginal_conditional(world, TokenSequence{})[1], 0.4, 1e-15);
}

TEST(MarginalConditional, InformativePrefix) {
  // 0.9 * 0.9 + 0.1 * 0.1 = 0.82
  const auto world = two_latent_world(0.1, 0.9);
  EXPECT_NEAR(marginal_conditional(world, TokenSequence{1})[1], 0.82, 1e-15);
}

TEST(RegimePosterior, EmptyPrefixIsPriorAndOverlapMatchesHandBayes) {
  const auto world = build_world(worlds::mixture_confusable_spec());
  const auto prior = regime_posterior(world, TokenSequence{});
  EXPECT_DOUBLE_EQ(prior[0], 0.5);
  // Hand Bayes for "0 0": 0.55^2 / (0.55^2 + 0.45^2) = 0.3025 / 0.505
  const auto rp = regime_posterior(world, TokenSequence{0, 0});
  EXPECT_NEAR(rp[0], 0.3025 / 0.505, 1e-14);
  EXPECT_NEAR(rp[1], 0.2025 / 0.505, 1e-14);
}

TEST(RegimeConditional, SingleLatentIsTheRow) {
  const auto world = build_world(worlds::mixture_confusable_spec());
  const auto d = regime_conditional(world, 1, TokenSequence{0});
  EXPECT_DOUBLE_EQ(d[0], 0.45);
}

TEST(RegimeConditional, SymmetricLatentsAverageRows) {
  const auto world = two_latent_world(0.2, 0.6);
  EXPECT_NEAR(regime_conditional(world, 0, TokenSequence{})[1], 0.4, 1e-15);
}

TEST(RegimeConditional, UnsupportedInRegime) {
  const auto world = build_world(worlds::mixture_identifiable_spec());
  EXPECT_THROW(regime_conditional(world, 1, TokenSequence{0}), ZeroSupportError);
}

TEST(RegimeConditional, AsymmetricFixtureMatchesEnumeration) {
  const auto world = build_world(worlds::sufficient_island_spec());
  const auto inside = world.restricted_to(1);
  const oracle::PathOracle paths(inside);
  const TokenSequence prefix{2, 0, 0};
  const auto d = regime_conditional(world, 1, prefix);
  const auto ref = paths.conditional(prefix);
  for (std::size_t v = 0; v < 3; ++v) EXPECT_NEAR(d[v], ref[v], 1e-12);
}

TEST(MixtureConditional, SingleRegimeEqualsRegimeConditional) {
  const auto world = two_latent_world(0.3, 0.8);
  const TokenSequence prefix{1, 1};
  EXPECT_NEAR(mixture_conditional(world, prefix)[1], regime_conditional(world, 0, prefix)[1], 1e-15);
}

TEST(MixtureConditional, ConfusableFixtureMatchesBruteForce) {
  const auto world = build_world(worlds::mixture_confusable_spec());
  const oracle::PathOracle paths(world);
  for (const TokenSequence& prefix : {TokenSequence{}, TokenSequence{0}, TokenSequence{0, 1}, TokenSequence{1, 1}}) {
    const auto d = mixture_conditional(world, prefix);
    const auto ref = paths.conditional(prefix);
    for (std::size_t v = 0; v < 2; ++v) EXPECT_NEAR(d[v], ref[v], 1e-12);
  }
}

TEST(ExactProperties, RandomWorldsAgreeWithPathEnumeration) {
  Rng rng(20240611);
  for (int trial = 0; trial < 30; ++trial) {
    const auto world = build_world(worlds::random_world_spec(rng));
    const oracle::PathOracle paths(world);
    for (std::size_t t = 0; t < world.horizon(); ++t) {
      for (const auto& prefix : paths.prefixes(t)) {
        const auto marg = marginal_conditional(world, prefix);
        const auto mix = mixture_conditional(world, prefix);
        const auto ref = paths.conditional(prefix);
        for (std::size_t v = 0; v < world.vocab_size(); ++v) {
          EXPECT_NEAR(marg[v], ref[v], 1e-12);
          EXPECT_NEAR(mix[v], marg[v], 1e-12);
        }
      }
    }
  }
}

TEST(EnumeratePrefixes, EmptyPrefix) {
  const auto world = build_world(worlds::insufficient_spec());
  const auto ens = enumerate_prefixes(world, 0);
  ASSERT_EQ(ens.entries.size(), 1u);
  EXPECT_TRUE(ens.entries[0].prefix.empty());
  EXPECT_EQ(ens.entries[0].probability, 1.0);
}

TEST(EnumeratePrefixes, UniformWorld) {
  const auto world = build_world(worlds::uniform_spec(2, 4, 1));
  const auto ens = enumerate_prefixes(world, 3);
  ASSERT_EQ(ens.entries.size(), 8u);
  for (const auto& e : ens.entries) EXPECT_DOUBLE_EQ(e.probability, 0.125);
}

TEST(EnumeratePrefixes, DeterministicWorldOnePrefixPerLatent) {
  const auto world = build_world(worlds::insufficient_spec());
  const auto ens = enumerate_prefixes(world, 3);
  ASSERT_EQ(ens.entries.size(), 2u);
  EXPECT_EQ(ens.entries[0].prefix, (TokenSequence{0, 0, 0}));
  EXPECT_DOUBLE_EQ(ens.entries[0].probability, 0.5);
  EXPECT_EQ(ens.entries[1].prefix, (TokenSequence{1, 1, 1}));
}

TEST(EnumeratePrefixes, BudgetIsEnforced) {
  const auto world = build_world(worlds::uniform_spec(4, 6, 1));
  EXPECT_THROW(enumerate_prefixes(world, 6, 1000), BudgetExceededError);
  EXPECT_NO_THROW(enumerate_prefixes(world, 4, 1000));
}

TEST(EnumeratePrefixes, ProbabilitiesSumToOneOnRandomWorlds) {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto world = build_world(worlds::random_world_spec(rng));
    for (std::size_t t = 0; t <= world.horizon(); ++t) {
      double total = 0.0;
      for (const auto& e : enumerate_prefixes(world, t).entries) total += e.probability;
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(EnumeratePrefixes, CsvExport) {
  const auto world = build_world(worlds::insufficient_spec());
  std::ostringstream os;
  enumerate_prefixes(world, 2).write_csv(os);
  EXPECT_EQ(os.str(), "prefix,probability\n0 0,0.5\n1 1,0.5\n");
}

} // namespace
} // namespace latentlab
