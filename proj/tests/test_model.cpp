#include <gtest/gtest.h>

#include <cmath>

#include "latentlab/exact.hpp"
#include "latentlab/info.hpp"
#include "latentlab/lab/random_world.hpp"
#include "latentlab/lab/worlds.hpp"
#include "latentlab/model_io.hpp"

namespace latentlab {
namespace {

Corpus corpus_of(std::vector<TokenSequence> seqs) {
  Corpus c;
  for (auto& s : seqs) c.samples.push_back({std::move(s), 0, 0});
  return c;
}

TEST(TabularModel, AddLambdaSmoothing) {
  TabularModel m(2, 1, 1.0);
  const auto key = m.key_for(TokenSequence{0});
  for (int i = 0; i < 3; ++i) m.add_count(key, 0);
  m.add_count(key, 1);
  const auto d = m.conditional(key);
  EXPECT_DOUBLE_EQ(d[0], 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(d[1], 2.0 / 6.0);
}

TEST(TabularModel, UnseenContext) {
  TabularModel unsmoothed(3, 1, 0.0);
  EXPECT_THROW(unsmoothed.conditional(unsmoothed.key_for(TokenSequence{2})), UnsupportedContextError);
  TabularModel smoothed(3, 1, 0.5);
  const auto d = smoothed.conditional(smoothed.key_for(TokenSequence{2}));
  for (std::size_t v = 0; v < 3; ++v) EXPECT_DOUBLE_EQ(d[v], 1.0 / 3.0);
}

TEST(TabularModel, RejectsBadConfiguration) {
  EXPECT_THROW(TabularModel(1, 1, 0.0), ConfigError);
  EXPECT_THROW(TabularModel(2, 1, -1.0), ConfigError);
  EXPECT_THROW(TabularModel(2, 1, std::nan("")), ConfigError);
}

TEST(FitTabular, CountsByHand) {
  const auto corpus = corpus_of({{0, 1, 1}, {0, 0, 1}, {1, 1, 0}});
  const auto m = fit_tabular(corpus, 2, 1, 0.0);
  // Contexts: ^ -> 0,0,1 ; 0 -> 1,0,1 ; 1 -> 1,1,0
  EXPECT_EQ(m.rows().at(m.key_for(TokenSequence{})), (std::vector<double>{2, 1}));
  EXPECT_EQ(m.rows().at(m.key_for(TokenSequence{0})), (std::vector<double>{1, 2}));
  EXPECT_EQ(m.rows().at(m.key_for(TokenSequence{5, 1})), (std::vector<double>{1, 2}));
  EXPECT_EQ(m.provenance().transitions, 9u);
  EXPECT_EQ(m.provenance().corpus_id, corpus.id());
  EXPECT_TRUE(context_support(m, TokenSequence{0}).supported);
  EXPECT_EQ(context_support(m, TokenSequence{0}).count, 3.0);
}

TEST(FitTabular, OrderZeroIsUnigram) {
  const auto m = fit_tabular(corpus_of({{0, 1, 1}, {1, 1, 1}}), 2, 0, 0.0);
  ASSERT_EQ(m.rows().size(), 1u);
  EXPECT_DOUBLE_EQ(model_conditional(m, TokenSequence{0, 0})[1], 5.0 / 6.0);
}

TEST(FitTabular, Errors) {
  EXPECT_THROW(fit_tabular(Corpus{}, 2, 1, 0.0), ConfigError);
  EXPECT_THROW(fit_tabular(corpus_of({{0, 2}}), 2, 1, 0.0), ConfigError);
}

TEST(FitTabular, IgnoresLatentFields) {
  Corpus a = corpus_of({{0, 1}, {1, 1}});
  Corpus b = a;
  b.samples[0].latent_value = 1;
  b.samples[1].regime_index = 3;
  b.latent_visible = true;
  EXPECT_EQ(fit_tabular(a, 2, 1, 0.0), fit_tabular(b, 2, 1, 0.0));
}

TEST(FitTabular, ConvergesToMarginal) {
  const auto world = build_world(worlds::noisy_latent_spec(3));
  Rng rng(17);
  const auto m = fit_tabular(sample_corpus(world, 40000, rng), world, 2, 0.0);
  for (const TokenSequence& prefix : {TokenSequence{}, TokenSequence{1}, TokenSequence{0, 0}, TokenSequence{0, 1}})
    EXPECT_NEAR(model_conditional(m, prefix)[1], marginal_conditional(world, prefix)[1], 0.02);
}

TEST(Temperature, SquaresAtOneHalf) {
  const auto d = apply_temperature(TokenDistribution({1.0 / 3.0, 2.0 / 3.0}), 0.5);
  EXPECT_NEAR(d[0], 0.2, 1e-15);
  EXPECT_NEAR(d[1], 0.8, 1e-15);
}

TEST(Temperature, LimitsAndZeros) {
  const TokenDistribution p({0.1, 0.0, 0.6, 0.3});
  const auto same = apply_temperature(p, 1.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(same[i], p[i], 1e-15);
  const auto hot = apply_temperature(p, 1e6);
  EXPECT_EQ(hot[1], 0.0);
  EXPECT_NEAR(hot[0], 1.0 / 3.0, 1e-5);
  const auto cold = apply_temperature(p, 0.01);
  EXPECT_NEAR(cold[2], 1.0, 1e-15);
  EXPECT_THROW(apply_temperature(p, 0.0), ConfigError);
  EXPECT_THROW(apply_temperature(p, -1.0), ConfigError);
  EXPECT_THROW(DecodingPolicy::sample(std::numeric_limits<double>::infinity()), ConfigError);
}

TEST(Temperature, EntropyIsMonotone) {
  const TokenDistribution p({0.5, 0.3, 0.15, 0.05});
  double last = 0.0;
  for (double T : {0.25, 0.5, 0.75, 1.0, 1.5, 2.0}) {
    const double h = entropy(apply_temperature(p, T));
    EXPECT_GT(h, last);
    last = h;
  }
}

TEST(Decoding, GreedyTakesLowestIndexOnTies) {
  TabularModel m(3, 0, 0.0);
  m.set_row(m.key_for(TokenSequence{}), {1.0, 2.0, 2.0});
  Rng rng(1);
  EXPECT_EQ(generate(m, DecodingPolicy::argmax(), 4, rng), (TokenSequence{1, 1, 1, 1}));
  EXPECT_EQ(DecodingPolicy::argmax().describe(), "greedy");
  EXPECT_EQ(DecodingPolicy::sample(0.5).describe(), "T=0.5");
}

TEST(Decoding, SamplingIsDeterministicPerSeedAndRespectsSupport) {
  TabularModel m(3, 1, 0.0);
  m.set_row(m.key_for(TokenSequence{}), {1.0, 1.0, 0.0});
  m.set_row(m.key_for(TokenSequence{0}), {0.0, 1.0, 1.0});
  m.set_row(m.key_for(TokenSequence{1}), {1.0, 0.0, 1.0});
  m.set_row(m.key_for(TokenSequence{2}), {1.0, 1.0, 0.0});
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) {
    const auto x = generate(m, DecodingPolicy::sample(0.7), 6, a);
    EXPECT_EQ(x, generate(m, DecodingPolicy::sample(0.7), 6, b));
    EXPECT_NE(x[0], 2);
    for (std::size_t t = 1; t < x.size(); ++t) EXPECT_NE(x[t], x[t - 1]);
  }
}

TEST(Decoding, UnsupportedContextIsLoud) {
  TabularModel m(2, 1, 0.0);
  m.set_row(m.key_for(TokenSequence{}), {0.0, 1.0});
  Rng rng(1);
  EXPECT_THROW(generate(m, DecodingPolicy::argmax(), 2, rng), UnsupportedContextError);
}

TEST(CrossEntropy, Values) {
  const auto corpus = corpus_of({{0, 1}, {1, 1}});
  TabularModel uniform(2, 1, 1.0);
  EXPECT_DOUBLE_EQ(corpus_cross_entropy(uniform, corpus), 1.0);
  TabularModel sparse(2, 1, 0.0);
  sparse.set_row(sparse.key_for(TokenSequence{}), {1.0, 0.0});
  EXPECT_TRUE(std::isinf(corpus_cross_entropy(sparse, corpus)));
}

TEST(ExactMarginalModel, RowsArePMarg) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto world = build_world(worlds::random_world_spec(rng));
    const auto m = exact_marginal_model(world);
    EXPECT_EQ(m.order(), world.horizon() - 1);
    for (std::size_t t = 0; t < world.horizon(); ++t)
      for (const auto& e : enumerate_prefixes(world, t).entries) {
        const auto a = model_conditional(m, e.prefix);
        const auto b = marginal_conditional(world, e.prefix);
        for (std::size_t v = 0; v < world.vocab_size(); ++v) EXPECT_NEAR(a[v], b[v], 1e-15);
      }
  }
}

TEST(ModelDump, RoundTripIsBitExact) {
  TabularModel m(3, 2, 0.1 + 0.2);
  m.set_row(m.key_for(TokenSequence{}), {1.0 / 3.0, 2.0 / 7.0, 1e-300});
  m.set_row(m.key_for(TokenSequence{2}, 7), {0.0, 5.0, 12.0});
  m.set_row(m.key_for(TokenSequence{0, 1}), {0.1, 0.7, 3.0});
  m.set_provenance({"deadbeef", 300});
  const std::string text = dump_model(m);
  const auto back = load_model_text(text);
  EXPECT_EQ(back, m);
  EXPECT_EQ(dump_model(back), text);
  EXPECT_EQ(back.smoothing(), 0.1 + 0.2);
  EXPECT_EQ(back.rows().at(back.key_for(TokenSequence{})), m.rows().at(m.key_for(TokenSequence{})));
}

TEST(ModelDump, FittedModelRoundTrip) {
  const auto world = build_world(worlds::collapse_spec());
  Rng rng(5);
  const auto m = fit_tabular(sample_corpus(world, 300, rng), world, 1, 0.0);
  const std::string text = dump_model(m);
  EXPECT_EQ(text.rfind("latentlab-model 1\nvocab_size 3\norder 1\nsmoothing 0\n", 0), 0u) << text;
  EXPECT_EQ(load_model_text(text), m);
  const auto order0 = fit_tabular(sample_corpus(world, 10, rng), world, 0, 0.5);
  EXPECT_EQ(load_model_text(dump_model(order0)), order0);
}

TEST(ModelDump, RejectsMalformedText) {
  EXPECT_THROW(load_model_text(""), ConfigError);
  EXPECT_THROW(load_model_text("latentlab-model 2\n"), ConfigError);
  TabularModel m(2, 1, 0.0);
  m.set_row(m.key_for(TokenSequence{}), {1.0, 1.0});
  std::string text = dump_model(m);
  EXPECT_THROW(load_model_text(text.substr(0, text.size() - 3)), ConfigError);
  std::string wrong_width = text;
  wrong_width.replace(wrong_width.find("row ^ - 1 1"), 11, "row ^ - 1 1 1");
  EXPECT_THROW(load_model_text(wrong_width), ConfigError);
}

} // namespace
} // namespace latentlab
