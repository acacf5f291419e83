#pragma once

// Channel outputs attached to corpora, and models trained on them.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentlab/channel.hpp"
#include "latentlab/model.hpp"
#include "latentlab/world_io.hpp"

namespace latentlab {

/// A corpus plus one symbol per position: symbols[m][t] accompanies the
/// prediction of tokens[t] from the first t tokens.
struct AugmentedCorpus {
  Corpus corpus;
  std::vector<std::vector<int>> symbols;
  /// False for inference-only channels: the symbols exist but training never sees them.
  bool present_at_training = true;
};

inline AugmentedCorpus augment_corpus(const Corpus& corpus, const AugmentationChannel& channel, Rng& rng) {
  if (channel.reads_latent() && !corpus.latent_visible)
    throw ConfigError("channel " + channel.name() +
                      " reads latent circumstances but the corpus hides them (latent_visible = false)");
  AugmentedCorpus out;
  out.corpus = corpus;
  out.present_at_training = !channel.inference_only();
  out.symbols.reserve(corpus.size());
  for (const auto& s : corpus.samples) {
    std::vector<int> row(s.tokens.size());
    if (channel.per_sequence()) {
      const auto r = channel.readout(s.regime_index, s.latent_value, {});
      std::fill(row.begin(), row.end(), channel.symbol_id(draw_index(r, rng)));
    } else {
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        const auto r = channel.readout(s.regime_index, s.latent_value, std::span(s.tokens).first(t));
        row[t] = channel.symbol_id(draw_index(r, rng));
      }
    }
    out.symbols.push_back(std::move(row));
  }
  return out;
}

/// fit_tabular with the channel symbol folded into every context key.
inline TabularModel fit_augmented(const AugmentedCorpus& data, std::size_t vocab_size, std::size_t order,
                                  double smoothing) {
  if (!data.present_at_training) return fit_tabular(data.corpus, vocab_size, order, smoothing);
  if (data.corpus.samples.empty()) throw ConfigError("cannot fit a model on an empty corpus");
  TabularModel model(vocab_size, order, smoothing);
  for (std::size_t m = 0; m < data.corpus.size(); ++m) {
    const auto& tokens = data.corpus.samples[m].tokens;
    for (std::size_t t = 0; t < tokens.size(); ++t)
      model.add_count(model.key_for(std::span(tokens).first(t), data.symbols[m][t]), tokens[t]);
  }
  model.set_provenance({data.corpus.id(), data.corpus.transitions()});
  return model;
}

// Channel files (JSON):
//
//   { "name": "reveal", "kind": "retrieval" | "tool",
//     "symbols": [10, 11],
//     "reads_latent": true, "context_order": 0, "inference_only": false,
//     "readout": { "k:z:context": [p_symbol0, p_symbol1, ...] } }
//
// k, z and context accept "*" wildcards; context is comma-separated with "^"
// for padding, like world files.

inline ChannelSpec parse_channel_spec(const nlohmann::json& j) {
  detail::reject_unknown_keys(
      j, {"name", "kind", "symbols", "reads_latent", "context_order", "inference_only", "readout"}, "channel");
  ChannelSpec spec;
  if (j.contains("name")) spec.name = detail::required<std::string>(j, "name", "channel");
  const auto kind = detail::required<std::string>(j, "kind", "channel");
  if (kind == "retrieval")
    spec.kind = ChannelKind::Retrieval;
  else if (kind == "tool")
    spec.kind = ChannelKind::Tool;
  else
    throw ConfigError("channel: kind must be \"retrieval\" or \"tool\"");
  spec.symbols = detail::required<std::vector<int>>(j, "symbols", "channel");
  if (j.contains("reads_latent")) spec.reads_latent = detail::required<bool>(j, "reads_latent", "channel");
  if (j.contains("context_order"))
    spec.context_order = detail::required<std::size_t>(j, "context_order", "channel");
  if (j.contains("inference_only"))
    spec.inference_only = detail::required<bool>(j, "inference_only", "channel");
  if (!j.contains("readout") || !j["readout"].is_object())
    throw ConfigError("channel: \"readout\" must be an object");
  for (const auto& [key, row] : j["readout"].items()) {
    const std::string where = "channel.readout[\"" + key + "\"]";
    const auto parts = detail::split(key, ':');
    if (parts.size() != 3) throw ConfigError(where + ": key must look like \"k:z:context\"");
    ChannelRule rule;
    if (parts[0] != "*") rule.regime = detail::parse_index(parts[0], where);
    if (parts[1] != "*") rule.latent = detail::parse_index(parts[1], where);
    rule.context = detail::parse_context_pattern(parts[2], where);
    rule.row = detail::parse_row(row, where);
    spec.readout.push_back(std::move(rule));
  }
  return spec;
}

inline ChannelSpec parse_channel_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("channel file is not valid JSON: ") + e.what());
  }
  return parse_channel_spec(j);
}

inline AugmentationChannel load_channel(const std::string& path, const LatentWorld& world) {
  return build_channel(parse_channel_text(read_text_file(path)), world);
}

} // namespace latentlab
