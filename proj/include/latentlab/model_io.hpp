#pragma once

// Plain-text model dump. Every number is written in shortest round-trip form,
// so dump(load(dump(m))) == dump(m) byte for byte.
//
//   latentlab-model 1
//   vocab_size 2
//   order 1
//   smoothing 0
//   corpus 8f3e2a
//   transitions 300
//   rows 2
//   row ^ - 40 60
//   row 0 5 12 3        (context "0", augmentation symbol 5)
//
// A context is comma-separated with "^" for padding, "." when the order is 0;
// "-" means no augmentation symbol.

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "latentlab/csv.hpp"
#include "latentlab/model.hpp"
#include "latentlab/world_io.hpp"

namespace latentlab {

inline void dump_model(const TabularModel& model, std::ostream& os) {
  os << "latentlab-model 1\n";
  os << "vocab_size " << model.vocab_size() << '\n';
  os << "order " << model.order() << '\n';
  os << "smoothing " << format_double(model.smoothing()) << '\n';
  os << "corpus " << (model.provenance().corpus_id.empty() ? "-" : model.provenance().corpus_id) << '\n';
  os << "transitions " << model.provenance().transitions << '\n';
  os << "rows " << model.rows().size() << '\n';
  for (const auto& [key, counts] : model.rows()) {
    os << "row ";
    if (key.context.empty()) {
      os << '.';
    } else {
      for (std::size_t i = 0; i < key.context.size(); ++i) {
        if (i) os << ',';
        if (key.context[i] == kBos)
          os << '^';
        else
          os << key.context[i];
      }
    }
    os << ' ';
    if (key.symbol == kNoSymbol)
      os << '-';
    else
      os << key.symbol;
    for (double c : counts) os << ' ' << format_double(c);
    os << '\n';
  }
}

inline std::string dump_model(const TabularModel& model) {
  std::ostringstream os;
  dump_model(model, os);
  return os.str();
}

inline TabularModel load_model(std::istream& is) {
  auto fail = [](const std::string& msg) -> ConfigError { return ConfigError("model file: " + msg); };
  std::string line;
  auto expect_field = [&](const std::string& name) {
    if (!std::getline(is, line)) throw fail("truncated before \"" + name + "\"");
    const std::string prefix = name + " ";
    if (line.rfind(prefix, 0) != 0) throw fail("expected \"" + name + "\", got \"" + line + "\"");
    return line.substr(prefix.size());
  };
  if (!std::getline(is, line) || line != "latentlab-model 1") throw fail("bad header");
  try {
    const auto vocab = detail::parse_index(expect_field("vocab_size"), "vocab_size");
    const auto order = detail::parse_index(expect_field("order"), "order");
    const double smoothing = parse_double(expect_field("smoothing"));
    std::string corpus = expect_field("corpus");
    if (corpus == "-") corpus.clear();
    const auto transitions = detail::parse_index(expect_field("transitions"), "transitions");
    const auto rows = detail::parse_index(expect_field("rows"), "rows");

    TabularModel model(vocab, order, smoothing);
    model.set_provenance({corpus, transitions});
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(is, line)) throw fail("truncated in rows");
      std::istringstream ls(line);
      std::string tag, ctx, sym;
      ls >> tag >> ctx >> sym;
      if (tag != "row") throw fail("expected a row, got \"" + line + "\"");
      ContextKey key;
      if (ctx != ".") {
        for (const auto& part : detail::split(ctx, ','))
          key.context.push_back(part == "^" ? kBos : static_cast<Token>(detail::parse_index(part, "context")));
      }
      if (key.context.size() != order) throw fail("context length does not match order in \"" + line + "\"");
      key.symbol = sym == "-" ? kNoSymbol : static_cast<int>(detail::parse_index(sym, "symbol"));
      std::vector<double> counts;
      std::string cell;
      while (ls >> cell) counts.push_back(parse_double(cell));
      if (counts.size() != vocab) throw fail("row has the wrong number of counts: \"" + line + "\"");
      model.set_row(key, std::move(counts));
    }
    return model;
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }
}

inline TabularModel load_model_text(const std::string& text) {
  std::istringstream is(text);
  return load_model(is);
}

} // namespace latentlab
