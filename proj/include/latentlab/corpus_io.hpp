#pragma once

// Corpus CSV: one sequence per row.
//
//   sequence,regime,latent,tokens
//   0,1,0,2 0 0 1
//
// regime and latent are oracle columns; fit_tabular never reads them.

#include <istream>
#include <sstream>
#include <string>

#include "latentlab/csv.hpp"
#include "latentlab/errors.hpp"
#include "latentlab/process.hpp"

namespace latentlab {

inline CsvTable corpus_table(const Corpus& corpus) {
  CsvTable t{{"sequence", "regime", "latent", "tokens"}, {}};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& s = corpus.samples[i];
    t.add({std::to_string(i), std::to_string(s.regime_index), std::to_string(s.latent_value), format_tokens(s.tokens)});
  }
  return t;
}

inline Corpus read_corpus_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "sequence,regime,latent,tokens")
    throw ConfigError("corpus file: expected header \"sequence,regime,latent,tokens\"");
  Corpus corpus;
  corpus.latent_visible = true;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string seq, regime, latent, tokens;
    if (!std::getline(fields, seq, ',') || !std::getline(fields, regime, ',') || !std::getline(fields, latent, ',') ||
        !std::getline(fields, tokens))
      throw ConfigError("corpus file line " + std::to_string(lineno) + ": expected 4 columns");
    SequenceSample s;
    try {
      s.regime_index = std::stoul(regime);
      s.latent_value = std::stoul(latent);
      std::istringstream ts(tokens);
      for (std::string tok; ts >> tok;) s.tokens.push_back(static_cast<Token>(std::stoi(tok)));
    } catch (const std::logic_error&) {
      throw ConfigError("corpus file line " + std::to_string(lineno) + ": malformed number");
    }
    corpus.samples.push_back(std::move(s));
  }
  if (corpus.samples.empty()) throw ConfigError("corpus file has no sequences");
  return corpus;
}

} // namespace latentlab
