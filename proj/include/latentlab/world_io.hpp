#pragma once

// World files: JSON text, schema in docs/formats.md.
//
//   {
//     "name": "insufficient",            (optional)
//     "vocab_size": 2,
//     "horizon": 3,
//     "context_order": 1,                (optional, default 2)
//     "enumeration_budget": 1048576,     (optional)
//     "regime_weights": [1.0],
//     "regimes": [
//       { "latent_prior": [0.5, 0.5],
//         "emission": { "0:*": [1, 0], "1:*": [0, 1] } }
//     ]
//   }
//
// Emission keys are "z:context" where z is a latent index or "*", and context
// is a comma-separated token list ("^" pads the beginning) or "*".

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "latentlab/process.hpp"

namespace latentlab {

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
}

inline std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::size_t parse_index(const std::string& s, const std::string& where) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(where + ": \"" + s + "\" is not a non-negative integer");
  return static_cast<std::size_t>(std::stoull(s));
}

/// "*" -> wildcard; "" -> empty context; otherwise "^,0,1".
inline std::optional<TokenSequence> parse_context_pattern(const std::string& s,
                                                          const std::string& where) {
  if (s == "*") return std::nullopt;
  TokenSequence ctx;
  if (s.empty()) return ctx;
  for (const std::string& part : split(s, ','))
    ctx.push_back(part == "^" ? kBos : static_cast<Token>(parse_index(part, where)));
  return ctx;
}

inline std::vector<double> parse_row(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
  std::vector<double> row;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(where + " must be an array of numbers");
    row.push_back(v.get<double>());
  }
  return row;
}

template <typename T>
T required(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing key \"" + key + "\"");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": key \"" + key + "\" has the wrong type");
  }
}

} // namespace detail

inline WorldSpec parse_world_spec(const nlohmann::json& j) {
  detail::reject_unknown_keys(j,
                              {"name", "vocab_size", "horizon", "context_order",
                               "enumeration_budget", "regime_weights", "regimes"},
                              "world");
  WorldSpec spec;
  if (j.contains("name")) spec.name = detail::required<std::string>(j, "name", "world");
  spec.vocab_size = detail::required<std::size_t>(j, "vocab_size", "world");
  spec.horizon = detail::required<std::size_t>(j, "horizon", "world");
  if (j.contains("context_order"))
    spec.context_order = detail::required<std::size_t>(j, "context_order", "world");
  if (j.contains("enumeration_budget"))
    spec.enumeration_budget = detail::required<std::uint64_t>(j, "enumeration_budget", "world");
  if (!j.contains("regime_weights")) throw ConfigError("world: missing key \"regime_weights\"");
  spec.regime_weights = detail::parse_row(j["regime_weights"], "regime_weights");
  if (!j.contains("regimes") || !j["regimes"].is_array())
    throw ConfigError("world: \"regimes\" must be an array");

  for (std::size_t k = 0; k < j["regimes"].size(); ++k) {
    const auto& rj = j["regimes"][k];
    const std::string where = "regimes[" + std::to_string(k) + "]";
    detail::reject_unknown_keys(rj, {"latent_prior", "emission"}, where);
    RegimeSpec rs;
    if (!rj.contains("latent_prior")) throw ConfigError(where + ": missing key \"latent_prior\"");
    rs.latent_prior = detail::parse_row(rj["latent_prior"], where + ".latent_prior");
    if (!rj.contains("emission") || !rj["emission"].is_object())
      throw ConfigError(where + ": \"emission\" must be an object");
    for (const auto& [key, row] : rj["emission"].items()) {
      const std::string kw = where + ".emission[\"" + key + "\"]";
      const auto colon = key.find(':');
      if (colon == std::string::npos) throw ConfigError(kw + ": key must look like \"z:context\"");
      EmissionRule rule;
      const std::string zpart = key.substr(0, colon);
      if (zpart != "*") rule.latent = detail::parse_index(zpart, kw);
      rule.context = detail::parse_context_pattern(key.substr(colon + 1), kw);
      rule.row = detail::parse_row(row, kw);
      rs.emission.push_back(std::move(rule));
    }
    spec.regimes.push_back(std::move(rs));
  }
  return spec;
}

inline WorldSpec parse_world_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("world file is not valid JSON: ") + e.what());
  }
  return parse_world_spec(j);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline LatentWorld load_world(const std::string& path) {
  return build_world(parse_world_text(read_text_file(path)));
}

} // namespace latentlab
