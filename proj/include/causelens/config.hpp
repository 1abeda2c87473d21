#pragma once

// Run configuration: defaults, a flat TOML config file, then command-line
// overrides. Only the TOML subset needed here is accepted: `key = value`
// lines with strings, numbers, booleans, and arrays of strings, plus
// comments. Tables are rejected.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "causelens/chaingen.hpp"
#include "causelens/error.hpp"
#include "causelens/simrep.hpp"
#include "causelens/traceio.hpp"

#ifndef CAUSELENS_DEFAULT_LEXICON
#define CAUSELENS_DEFAULT_LEXICON "data/default_lexicon.json"
#endif

namespace causelens {

struct RunConfig {
  std::filesystem::path lexicon = CAUSELENS_DEFAULT_LEXICON;
  std::vector<Language> languages{kAllLanguages.begin(), kAllLanguages.end()};
  std::vector<Order> orders{kAllOrders.begin(), kAllOrders.end()};
  std::vector<Condition> conditions;  // empty: languages x orders
  std::filesystem::path traces;
  std::filesystem::path out;
  std::string anchor{anchor::kFinalChainToken};
  double variance_keep = kDefaultVarianceKeep;
  bool correct_only = false;
  int jobs = 0;  // 0: hardware concurrency
  std::string model_id;
  bool export_ratios = false;

  // Conditions in canonical order restricted to languages x orders, unless
  // given explicitly.
  std::vector<Condition> effective_conditions() const {
    if (!conditions.empty()) return conditions;
    std::vector<Condition> out;
    for (const auto& c : kAllConditions) {
      if (std::find(languages.begin(), languages.end(), c.language) != languages.end() &&
          std::find(orders.begin(), orders.end(), c.order) != orders.end()) {
        out.push_back(c);
      }
    }
    return out;
  }

  void validate() const {
    if (!(variance_keep > 0.0 && variance_keep <= 1.0)) {
      throw Error(ErrorCode::kConfig, "variance_keep must lie in (0, 1]");
    }
    if (jobs < 0) throw Error(ErrorCode::kConfig, "jobs must be >= 0");
    if (languages.empty()) throw Error(ErrorCode::kConfig, "no languages selected");
    if (orders.empty()) throw Error(ErrorCode::kConfig, "no orders selected");
    const std::vector<std::pair<const char*, const std::filesystem::path*>> paths{
        {"lexicon", &lexicon}, {"traces", &traces}, {"out", &out}};
    for (std::size_t i = 0; i < paths.size(); ++i) {
      for (std::size_t j = i + 1; j < paths.size(); ++j) {
        if (paths[i].second->empty() || paths[j].second->empty()) continue;
        if (std::filesystem::weakly_canonical(*paths[i].second) ==
            std::filesystem::weakly_canonical(*paths[j].second)) {
          throw Error(ErrorCode::kConfig, std::string(paths[i].first) + " and " + paths[j].first +
                                              " must be distinct paths");
        }
      }
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["lexicon"] = lexicon.generic_string();
    auto langs = nlohmann::ordered_json::array();
    for (auto l : languages) langs.push_back(to_string(l));
    j["languages"] = std::move(langs);
    auto ords = nlohmann::ordered_json::array();
    for (auto o : orders) ords.push_back(to_string(o));
    j["orders"] = std::move(ords);
    auto conds = nlohmann::ordered_json::array();
    for (const auto& c : effective_conditions()) conds.push_back(c.name());
    j["conditions"] = std::move(conds);
    j["traces"] = traces.generic_string();
    j["out"] = out.generic_string();
    j["anchor"] = anchor;
    j["variance_keep"] = variance_keep;
    j["correct_only"] = correct_only;
    j["model_id"] = model_id;
    j["export_ratios"] = export_ratios;
    // jobs is deliberately absent: it cannot change any output byte.
    return j;
  }
};

// ---------------------------------------------------------------------------
// Minimal TOML reader

using TomlValue = std::variant<std::string, double, bool, std::vector<std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

class TomlLine {
 public:
  TomlLine(std::string_view text, std::string where) : s_(text), where_(std::move(where)) {}

  TomlValue value() {
    skip_ws();
    if (eof()) fail("missing value");
    TomlValue v;
    const char c = s_[i_];
    if (c == '"' || c == '\'') {
      v = string();
    } else if (c == '[') {
      v = array();
    } else if (s_.compare(i_, 4, "true") == 0) {
      i_ += 4;
      v = true;
    } else if (s_.compare(i_, 5, "false") == 0) {
      i_ += 5;
      v = false;
    } else {
      v = number();
    }
    skip_ws();
    if (!eof() && s_[i_] != '#') fail("unexpected trailing characters");
    return v;
  }

 private:
  bool eof() const { return i_ >= s_.size(); }
  void skip_ws() {
    while (!eof() && (s_[i_] == ' ' || s_[i_] == '\t' || s_[i_] == '\r')) ++i_;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::kConfig, where_ + ": " + msg);
  }

  std::string string() {
    const char quote = s_[i_++];
    std::string out;
    while (!eof() && s_[i_] != quote) {
      char c = s_[i_++];
      if (quote == '"' && c == '\\') {
        if (eof()) fail("unterminated escape");
        const char e = s_[i_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '\\': c = '\\'; break;
          case '"': c = '"'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (eof()) fail("unterminated string");
    ++i_;
    return out;
  }

  std::vector<std::string> array() {
    ++i_;
    std::vector<std::string> out;
    skip_ws();
    while (!eof() && s_[i_] != ']') {
      if (s_[i_] != '"' && s_[i_] != '\'') fail("arrays may only hold strings");
      out.push_back(string());
      skip_ws();
      if (!eof() && s_[i_] == ',') {
        ++i_;
        skip_ws();
      } else if (eof() || s_[i_] != ']') {
        fail("expected ',' or ']' in array");
      }
    }
    if (eof()) fail("unterminated array");
    ++i_;
    return out;
  }

  double number() {
    std::size_t start = i_;
    while (!eof() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.' ||
                      s_[i_] == '-' || s_[i_] == '+' || s_[i_] == 'e' || s_[i_] == 'E' ||
                      s_[i_] == '_')) {
      ++i_;
    }
    std::string text(s_.substr(start, i_ - start));
    text.erase(std::remove(text.begin(), text.end(), '_'), text.end());
    if (text.empty()) fail("unrecognized value");
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) fail("malformed number '" + text + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("malformed number '" + text + "'");
    }
  }

  std::string_view s_;
  std::string where_;
  std::size_t i_ = 0;
};

}  // namespace detail

inline std::map<std::string, TomlValue> parse_toml(std::string_view text,
                                                   const std::string& origin = "<config>") {
  std::map<std::string, TomlValue> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t[0] == '[') throw Error(ErrorCode::kConfig, where + ": tables are not supported");
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfig, where + ": expected key = value");
    auto key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
    if (key.empty()) throw Error(ErrorCode::kConfig, where + ": empty key");
    if (out.count(key)) throw Error(ErrorCode::kConfig, where + ": duplicate key '" + key + "'");
    out[key] = detail::TomlLine(std::string_view(t).substr(eq + 1), where).value();
  }
  return out;
}

namespace detail {

template <typename T>
const T& toml_get(const TomlValue& v, const std::string& key, const char* kind) {
  if (const auto* p = std::get_if<T>(&v)) return *p;
  throw Error(ErrorCode::kConfig, "config key '" + key + "' must be " + kind);
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::vector<std::string>& items, Parse parse) {
  std::vector<T> out;
  for (const auto& s : items) {
    try {
      const T v = parse(s);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, e.what());
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<Language> parse_languages(const std::vector<std::string>& items) {
  return detail::parse_list<Language>(items, parse_language);
}
inline std::vector<Order> parse_orders(const std::vector<std::string>& items) {
  return detail::parse_list<Order>(items, parse_order);
}
inline std::vector<Condition> parse_conditions(const std::vector<std::string>& items) {
  return detail::parse_list<Condition>(items, parse_condition);
}

// Applies config-file keys onto `cfg`. Relative paths resolve against the
// config file's directory.
inline void apply_toml(RunConfig& cfg, const std::map<std::string, TomlValue>& doc,
                       const std::filesystem::path& base_dir = {}) {
  using detail::toml_get;
  auto path = [&](const std::string& s) {
    std::filesystem::path p(s);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  for (const auto& [key, v] : doc) {
    if (key == "lexicon") {
      cfg.lexicon = path(toml_get<std::string>(v, key, "a string"));
    } else if (key == "traces") {
      cfg.traces = path(toml_get<std::string>(v, key, "a string"));
    } else if (key == "out") {
      cfg.out = path(toml_get<std::string>(v, key, "a string"));
    } else if (key == "languages") {
      cfg.languages = parse_languages(toml_get<std::vector<std::string>>(v, key, "a string array"));
    } else if (key == "orders") {
      cfg.orders = parse_orders(toml_get<std::vector<std::string>>(v, key, "a string array"));
    } else if (key == "conditions") {
      cfg.conditions =
          parse_conditions(toml_get<std::vector<std::string>>(v, key, "a string array"));
    } else if (key == "anchor") {
      cfg.anchor = toml_get<std::string>(v, key, "a string");
    } else if (key == "variance_keep") {
      cfg.variance_keep = toml_get<double>(v, key, "a number");
    } else if (key == "correct_only") {
      cfg.correct_only = toml_get<bool>(v, key, "a boolean");
    } else if (key == "jobs") {
      const double j = toml_get<double>(v, key, "a number");
      if (j < 0 || j != std::floor(j)) throw Error(ErrorCode::kConfig, "jobs must be an integer >= 0");
      cfg.jobs = static_cast<int>(j);
    } else if (key == "model_id") {
      cfg.model_id = toml_get<std::string>(v, key, "a string");
    } else if (key == "export_ratios") {
      cfg.export_ratios = toml_get<bool>(v, key, "a boolean");
    } else {
      throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
    }
  }
}

inline void load_config_file(RunConfig& cfg, const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config '" + file.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_toml(cfg, parse_toml(ss.str(), file.string()), file.parent_path());
}

// Output directory fallback from the environment when neither flag nor
// config file set one.
inline void apply_out_fallback(RunConfig& cfg) {
  if (!cfg.out.empty()) return;
  if (const char* env = std::getenv("CAUSELENS_OUT"); env != nullptr && *env != '\0') {
    cfg.out = env;
  } else {
    cfg.out = "causelens-out";
  }
}

}  // namespace causelens
