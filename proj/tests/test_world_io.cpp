#include <gtest/gtest.h>

#include "latentlab/augment.hpp"
#include "latentlab/exact.hpp"
#include "latentlab/lab/worlds.hpp"
#include "latentlab/world_io.hpp"

namespace latentlab {
namespace {

const std::string kRoot = LATENTLAB_SOURCE_DIR;

void expect_same_tables(const LatentWorld& a, const LatentWorld& b) {
  ASSERT_EQ(a.vocab_size(), b.vocab_size());
  ASSERT_EQ(a.horizon(), b.horizon());
  ASSERT_EQ(a.context_order(), b.context_order());
  ASSERT_EQ(a.regime_weights(), b.regime_weights());
  for (std::size_t k = 0; k < a.regime_count(); ++k) {
    ASSERT_EQ(a.regime(k).latent_prior(), b.regime(k).latent_prior());
    for (std::size_t z = 0; z < a.regime(k).latent_size(); ++z)
      for (const auto& ctx : a.reachable_contexts()) {
        const auto ra = a.emission(k, z, ctx);
        const auto rb = b.emission(k, z, ctx);
        for (std::size_t v = 0; v < ra.size(); ++v) EXPECT_EQ(ra[v], rb[v]) << format_context(ctx);
      }
  }
}

TEST(WorldFile, ShippedFilesMatchBuiltInFixtures) {
  expect_same_tables(load_world(kRoot + "/worlds/insufficient.json"), build_world(worlds::insufficient_spec()));
  expect_same_tables(load_world(kRoot + "/worlds/sufficient-island.json"),
                     build_world(worlds::sufficient_island_spec()));
  expect_same_tables(load_world(kRoot + "/worlds/mixture-confusable.json"),
                     build_world(worlds::mixture_confusable_spec()));
  expect_same_tables(load_world(kRoot + "/worlds/collapse.json"), build_world(worlds::collapse_spec()));
}

TEST(WorldFile, DefaultContextOrderIsTwo) {
  const auto world = load_world(kRoot + "/worlds/order2-noisy.json");
  EXPECT_EQ(world.context_order(), 2u);
  EXPECT_EQ(world.name(), "order2-noisy");
  // (0, [1,1]) beats the z-wide default.
  EXPECT_DOUBLE_EQ(full_conditional(world, 0, 0, TokenSequence{1, 1})[1], 0.6);
  EXPECT_DOUBLE_EQ(full_conditional(world, 0, 0, TokenSequence{0, 1})[1], 0.2);
  EXPECT_DOUBLE_EQ(full_conditional(world, 0, 1, TokenSequence{})[1], 0.5);
}

TEST(WorldFile, ContextPatterns) {
  const auto spec = parse_world_text(R"({
    "vocab_size": 2, "horizon": 2, "context_order": 1, "regime_weights": [1],
    "regimes": [{"latent_prior": [1], "emission": {"*:^": [0.25, 0.75], "0:1": [1, 0], "*:*": [0.5, 0.5]}}]
  })");
  // Rule order in the file carries no meaning; keys come back sorted.
  const auto& rules = spec.regimes[0].emission;
  ASSERT_EQ(rules.size(), 3u);
  EXPECT_FALSE(rules[0].latent.has_value());
  EXPECT_FALSE(rules[0].context.has_value());
  EXPECT_FALSE(rules[1].latent.has_value());
  EXPECT_EQ(*rules[1].context, TokenSequence{kBos});
  EXPECT_EQ(*rules[2].latent, 0u);
  EXPECT_EQ(*rules[2].context, TokenSequence{1});
  const auto world = build_world(spec);
  EXPECT_DOUBLE_EQ(marginal_conditional(world, TokenSequence{})[1], 0.75);
  EXPECT_DOUBLE_EQ(marginal_conditional(world, TokenSequence{1})[0], 1.0);
}

TEST(WorldFile, Errors) {
  EXPECT_THROW(parse_world_text("{not json"), ConfigError);
  EXPECT_THROW(parse_world_text(R"({"vocab_size": 2})"), ConfigError);
  EXPECT_THROW(parse_world_text(R"({"vocab_size": 2, "horizon": 2, "regime_weights": [1], "regimes": [],
                                   "colour": 1})"),
               ConfigError);
  EXPECT_THROW(parse_world_text(R"({"vocab_size": "two", "horizon": 2, "regime_weights": [1], "regimes": []})"),
               ConfigError);
  EXPECT_THROW(parse_world_text(R"({"vocab_size": 2, "horizon": 2, "regime_weights": [1],
                                   "regimes": [{"latent_prior": [1], "emission": {"zero": [1, 0]}}]})"),
               ConfigError);
  EXPECT_THROW(parse_world_text(R"({"vocab_size": 2, "horizon": 2, "regime_weights": [1],
                                   "regimes": [{"latent_prior": [1], "emission": {"x:*": [1, 0]}}]})"),
               ConfigError);
  EXPECT_THROW(load_world(kRoot + "/worlds/does-not-exist.json"), ConfigError);
}

TEST(WorldFile, UnnormalizedRowFromFileIsNamed) {
  const auto spec = parse_world_text(R"({"vocab_size": 2, "horizon": 2, "context_order": 1, "regime_weights": [1],
    "regimes": [{"latent_prior": [1], "emission": {"*:*": [0.5, 0.5], "0:1": [0.3, 0.3]}}]})");
  try {
    build_world(spec);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("0.6"), std::string::npos) << e.what();
  }
}

TEST(ChannelFile, ShippedChannelsLoad) {
  const auto world = load_world(kRoot + "/worlds/insufficient.json");
  const auto reveal = load_channel(kRoot + "/channels/reveal-z.json", world);
  EXPECT_EQ(reveal.kind(), ChannelKind::Retrieval);
  EXPECT_TRUE(reveal.per_sequence());
  EXPECT_EQ(reveal.readout(0, 1, TokenSequence{})[1], 1.0);

  const auto tool = load_channel(kRoot + "/channels/last-token.json", world);
  EXPECT_EQ(tool.kind(), ChannelKind::Tool);
  EXPECT_FALSE(tool.reads_latent());
  EXPECT_EQ(tool.readout(0, 0, TokenSequence{0, 1})[1], 1.0);
  EXPECT_EQ(tool.readout(0, 1, TokenSequence{})[0], 1.0);

  EXPECT_TRUE(load_channel(kRoot + "/channels/prompt-reveal.json", world).inference_only());
  EXPECT_EQ(load_channel(kRoot + "/channels/noisy-reveal.json", world).symbol_count(), 3u);
}

TEST(ChannelFile, Errors) {
  const auto world = build_world(worlds::insufficient_spec());
  // Symbol 1 collides with a token.
  EXPECT_THROW(build_channel(parse_channel_text(R"({"kind": "retrieval", "symbols": [1, 2],
                                                    "readout": {"*:*:*": [0.5, 0.5]}})"),
                             world),
               ConfigError);
  // Tool rows must be point masses.
  EXPECT_THROW(build_channel(parse_channel_text(R"({"kind": "tool", "symbols": [2, 3],
                                                    "readout": {"*:*:*": [0.5, 0.5]}})"),
                             world),
               ConfigError);
  // Latent-keyed row on a channel that promises not to read latents.
  EXPECT_THROW(build_channel(parse_channel_text(R"({"kind": "retrieval", "symbols": [2, 3], "reads_latent": false,
                                                    "readout": {"*:0:*": [1, 0], "*:*:*": [0, 1]}})"),
                             world),
               ConfigError);
  // Missing readout coverage for z = 1.
  EXPECT_THROW(build_channel(parse_channel_text(R"({"kind": "retrieval", "symbols": [2],
                                                    "readout": {"*:0:*": [1]}})"),
                             world),
               ConfigError);
  EXPECT_THROW(parse_channel_text(R"({"kind": "oracle", "symbols": [2], "readout": {}})"), ConfigError);
  EXPECT_THROW(parse_channel_text(R"({"kind": "tool", "symbols": [2], "readout": {"0:*": [1]}})"), ConfigError);
}

} // namespace
} // namespace latentlab
