#pragma once

// Bilingual causal-chain dataset: lexicon loading, template rendering with
// component span annotations, dataset generation and cross-language checks.

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "causelens/error.hpp"
#include "causelens/unicode.hpp"

namespace causelens {

enum class Language { kEn, kZh };
enum class Order { kForward, kReversed };
enum class Segment { kStatement, kQuestion };
enum class Role { kCause, kIntermediate, kFinal };

inline constexpr std::array<Language, 2> kAllLanguages{Language::kEn, Language::kZh};
inline constexpr std::array<Order, 2> kAllOrders{Order::kForward, Order::kReversed};
inline constexpr std::array<Role, 3> kAllRoles{Role::kCause, Role::kIntermediate,
                                               Role::kFinal};

inline std::string_view to_string(Language lang) {
  return lang == Language::kEn ? "en" : "zh";
}
inline std::string_view to_string(Order order) {
  return order == Order::kForward ? "forward" : "reversed";
}
inline std::string_view to_string(Segment seg) {
  return seg == Segment::kStatement ? "statement" : "question";
}
inline std::string_view to_string(Role role) {
  switch (role) {
    case Role::kCause: return "cause";
    case Role::kIntermediate: return "intermediate";
    case Role::kFinal: return "final";
  }
  return "?";
}

inline Language parse_language(std::string_view s) {
  if (s == "en") return Language::kEn;
  if (s == "zh") return Language::kZh;
  throw Error(ErrorCode::kParse, "unknown language '" + std::string(s) + "'");
}
inline Order parse_order(std::string_view s) {
  if (s == "forward" || s == "fwd") return Order::kForward;
  if (s == "reversed" || s == "rev") return Order::kReversed;
  throw Error(ErrorCode::kParse, "unknown order '" + std::string(s) + "'");
}
inline Segment parse_segment(std::string_view s) {
  if (s == "statement") return Segment::kStatement;
  if (s == "question") return Segment::kQuestion;
  throw Error(ErrorCode::kParse, "unknown segment '" + std::string(s) + "'");
}
inline Role parse_role(std::string_view s) {
  if (s == "cause") return Role::kCause;
  if (s == "intermediate") return Role::kIntermediate;
  if (s == "final") return Role::kFinal;
  throw Error(ErrorCode::kParse, "unknown causal role '" + std::string(s) + "'");
}

// One experimental cell, e.g. "zh-fwd".
struct Condition {
  Language language = Language::kEn;
  Order order = Order::kForward;

  std::string name() const {
    return std::string(to_string(language)) + (order == Order::kForward ? "-fwd" : "-rev");
  }
  auto operator<=>(const Condition&) const = default;
};

inline Condition parse_condition(std::string_view s) {
  const auto dash = s.find('-');
  if (dash == std::string_view::npos) {
    throw Error(ErrorCode::kParse, "condition must look like 'en-fwd', got '" +
                                       std::string(s) + "'");
  }
  return {parse_language(s.substr(0, dash)), parse_order(s.substr(dash + 1))};
}

inline constexpr std::array<Condition, 4> kAllConditions{
    Condition{Language::kEn, Order::kForward}, Condition{Language::kZh, Order::kForward},
    Condition{Language::kEn, Order::kReversed}, Condition{Language::kZh, Order::kReversed}};

namespace component {
inline constexpr std::string_view kCauseSubj = "cause_subj";
inline constexpr std::string_view kCauseVerb = "cause_verb";
inline constexpr std::string_view kInterSubj = "inter_subj";
inline constexpr std::string_view kInterVerb = "inter_verb";
inline constexpr std::string_view kFinalSubj = "final_subj";
inline constexpr std::string_view kFinalVerb = "final_verb";
inline constexpr std::string_view kQSubj = "q_subj";
inline constexpr std::string_view kQVerb = "q_verb";
inline constexpr std::string_view kOnce = "once";
inline constexpr std::string_view kThen = "then";
inline constexpr std::string_view kIf = "if";
inline constexpr std::string_view kTherefore = "therefore";
inline constexpr std::string_view kFinalResult = "final_result_trigger";
inline constexpr std::string_view kDueTo = "due_to";
inline constexpr std::string_view kOriginatesFrom = "originates_from";

// The syntactic components of a forward chain plus its question.
inline constexpr std::array<std::string_view, 13> kSyntactic{
    kCauseSubj, kCauseVerb, kInterSubj, kInterVerb, kFinalSubj, kFinalVerb, kQSubj,
    kQVerb,     kOnce,      kThen,      kIf,        kTherefore, kFinalResult};

inline constexpr std::array<std::string_view, 6> kConnectives{
    kOnce, kThen, kIf, kTherefore, kDueTo, kOriginatesFrom};

inline bool is_connective(std::string_view id) {
  return std::find(kConnectives.begin(), kConnectives.end(), id) != kConnectives.end();
}
}  // namespace component

// The eight domains, in canonical order.
inline constexpr std::array<std::string_view, 8> kDomains{
    "household_routine",  "natural_events",       "school_life",
    "healthcare",         "shopping_retail",      "workplace_activities",
    "public_transportation", "leisure_recreation"};

struct Phrase {
  std::string subject;
  std::string verb;

  bool operator==(const Phrase&) const = default;
};

struct CausalTriple {
  std::string domain;
  std::string key;
  std::array<Phrase, 3> en;  // cause, intermediate, final
  std::array<Phrase, 3> zh;

  const std::array<Phrase, 3>& steps(Language lang) const {
    return lang == Language::kEn ? en : zh;
  }
  bool operator==(const CausalTriple&) const = default;
};

struct Lexicon {
  std::string version;
  std::string provenance;
  // Keyed by domain name; iteration follows kDomains via domain_order().
  std::map<std::string, std::vector<CausalTriple>> domains;

  std::size_t triple_count() const {
    std::size_t n = 0;
    for (const auto& [_, triples] : domains) n += triples.size();
    return n;
  }

  // Triples in canonical domain order, then file order within a domain.
  std::vector<const CausalTriple*> ordered() const {
    std::vector<const CausalTriple*> out;
    for (auto name : kDomains) {
      auto it = domains.find(std::string(name));
      if (it == domains.end()) continue;
      for (const auto& t : it->second) out.push_back(&t);
    }
    return out;
  }
};

struct Span {
  std::string component_id;
  Segment segment = Segment::kStatement;
  int char_start = 0;  // scalar offsets into the segment's text, half-open
  int char_end = 0;
  std::string text;

  bool operator==(const Span&) const = default;
};

struct RolePair {
  std::string subject_id;
  std::string verb_id;

  bool operator==(const RolePair&) const = default;
};

struct AnnotatedSample {
  std::string key;
  std::string domain;
  Language language = Language::kEn;
  Order order = Order::kForward;
  std::string rendered_text;
  std::string question_text;
  std::string gold_answer;
  std::vector<Span> annotations;
  std::map<Role, RolePair> causal_roles;

  Condition condition() const { return {language, order}; }
  const std::string& segment_text(Segment seg) const {
    return seg == Segment::kStatement ? rendered_text : question_text;
  }
  const Span* find(std::string_view component_id) const {
    for (const auto& s : annotations) {
      if (s.component_id == component_id) return &s;
    }
    return nullptr;
  }
  std::set<std::string> component_ids() const {
    std::set<std::string> ids;
    for (const auto& s : annotations) ids.insert(s.component_id);
    return ids;
  }
  bool operator==(const AnnotatedSample&) const = default;
};

// ---------------------------------------------------------------------------
// Templates

namespace detail {

// A template is an alternation of literals and component slots:
// literal[0] slot[0] literal[1] ... slot[n-1] literal[n].
struct Template {
  std::vector<std::string> literals;
  std::vector<std::string> slots;
};

inline Template statement_template(Language lang, Order order) {
  using namespace component;
  if (order == Order::kForward) {
    std::vector<std::string> slots{std::string(kOnce),      std::string(kCauseSubj),
                                   std::string(kCauseVerb), std::string(kInterSubj),
                                   std::string(kInterVerb), std::string(kThen),
                                   std::string(kFinalSubj), std::string(kFinalVerb)};
    if (lang == Language::kEn) {
      return {{"", " ", " ", ", ", " ", ", ", " ", " ", "."}, slots};
    }
    return {{"", "", "", "，", "就", "，", "", "就", "。"}, slots};
  }
  std::vector<std::string> slots{std::string(kFinalSubj),  std::string(kFinalVerb),
                                 std::string(kDueTo),      std::string(kInterSubj),
                                 std::string(kInterVerb),  std::string(kOriginatesFrom),
                                 std::string(kCauseSubj),  std::string(kCauseVerb)};
  if (lang == Language::kEn) {
    return {{"", " ", ", ", " ", " ", ", ", " ", " ", "."}, slots};
  }
  return {{"", "", "，", "", "", "，", "", "", "。"}, slots};
}

// Reversed chains reuse the forward question, but only its subject, verb
// and trigger are annotated there.
inline Template question_template(Language lang, Order order) {
  using namespace component;
  if (order == Order::kForward) {
    std::vector<std::string> slots{std::string(kTherefore), std::string(kIf),
                                   std::string(kQSubj), std::string(kQVerb),
                                   std::string(kFinalResult)};
    if (lang == Language::kEn) return {{"", ", ", " ", " ", ", the ", " is"}, slots};
    return {{"", "，", "", "", "，", "是"}, slots};
  }
  std::vector<std::string> slots{std::string(kQSubj), std::string(kQVerb),
                                 std::string(kFinalResult)};
  if (lang == Language::kEn) return {{"Therefore, if ", " ", ", the ", " is"}, slots};
  return {{"因此，如果", "", "，", "是"}, slots};
}

inline std::string connective_text(std::string_view id, Language lang) {
  using namespace component;
  const bool en = lang == Language::kEn;
  if (id == kOnce) return en ? "Once" : "一旦";
  if (id == kThen) return en ? "then" : "然后";
  if (id == kIf) return en ? "if" : "如果";
  if (id == kTherefore) return en ? "Therefore" : "因此";
  if (id == kFinalResult) return en ? "final result" : "最终结果";
  if (id == kDueTo) return en ? "due to" : "是由于";
  if (id == kOriginatesFrom) return en ? "which originates from" : "而这源自";
  return {};
}

inline Template segment_template(Language lang, Order order, Segment seg) {
  return seg == Segment::kStatement ? statement_template(lang, order)
                                    : question_template(lang, order);
}

}  // namespace detail

// Literal separators of a template, in order; one more than the number of
// annotated components in that segment.
inline std::vector<std::string> template_literals(Language lang, Order order, Segment seg) {
  return detail::segment_template(lang, order, seg).literals;
}

inline std::vector<std::string> expected_component_ids(Order order) {
  std::vector<std::string> ids;
  for (auto seg : {Segment::kStatement, Segment::kQuestion}) {
    for (auto& s : detail::segment_template(Language::kEn, order, seg).slots) ids.push_back(s);
  }
  return ids;
}

inline AnnotatedSample render_chain(const CausalTriple& triple, Language lang, Order order) {
  using namespace component;
  const auto& steps = triple.steps(lang);
  const bool en = lang == Language::kEn;

  std::map<std::string, std::string, std::less<>> fill{
      {std::string(kCauseSubj), steps[0].subject}, {std::string(kCauseVerb), steps[0].verb},
      {std::string(kInterSubj), steps[1].subject}, {std::string(kInterVerb), steps[1].verb},
      {std::string(kFinalSubj), steps[2].subject}, {std::string(kFinalVerb), steps[2].verb},
      {std::string(kQSubj), steps[0].subject},     {std::string(kQVerb), steps[0].verb}};
  // English sentence-initial subject is capitalized.
  if (en && order == Order::kReversed) {
    fill[std::string(kFinalSubj)] = unicode::capitalize_first(steps[2].subject);
  }

  AnnotatedSample sample;
  sample.key = triple.key;
  sample.domain = triple.domain;
  sample.language = lang;
  sample.order = order;

  for (auto seg : {Segment::kStatement, Segment::kQuestion}) {
    const auto tmpl = detail::segment_template(lang, order, seg);
    std::string text;
    int cursor = 0;
    for (std::size_t i = 0; i < tmpl.slots.size(); ++i) {
      text += tmpl.literals[i];
      cursor += static_cast<int>(unicode::length(tmpl.literals[i]));
      const auto& id = tmpl.slots[i];
      auto it = fill.find(id);
      const std::string piece = it != fill.end() ? it->second : detail::connective_text(id, lang);
      const int len = static_cast<int>(unicode::length(piece));
      sample.annotations.push_back({id, seg, cursor, cursor + len, piece});
      text += piece;
      cursor += len;
    }
    text += tmpl.literals.back();
    (seg == Segment::kStatement ? sample.rendered_text : sample.question_text) = std::move(text);
  }

  sample.gold_answer = en ? unicode::capitalize_first(steps[2].subject) + " " + steps[2].verb + "."
                          : steps[2].subject + steps[2].verb;
  sample.causal_roles = {
      {Role::kCause, {std::string(kCauseSubj), std::string(kCauseVerb)}},
      {Role::kIntermediate, {std::string(kInterSubj), std::string(kInterVerb)}},
      {Role::kFinal, {std::string(kFinalSubj), std::string(kFinalVerb)}}};
  return sample;
}

struct GenerateOptions {
  std::vector<Language> languages{kAllLanguages.begin(), kAllLanguages.end()};
  std::vector<Order> orders{kAllOrders.begin(), kAllOrders.end()};
};

// Samples are grouped by (language, order) in the given orders, then by
// canonical domain order.
inline std::vector<AnnotatedSample> generate_dataset(const Lexicon& lexicon,
                                                     const std::vector<Language>& languages,
                                                     const std::vector<Order>& orders) {
  std::vector<AnnotatedSample> out;
  const auto triples = lexicon.ordered();
  out.reserve(languages.size() * orders.size() * triples.size());
  for (auto lang : languages) {
    for (auto order : orders) {
      for (const auto* t : triples) out.push_back(render_chain(*t, lang, order));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

// Checks that the gaps between a segment's spans are exactly the template
// literals and that every span's text matches the rendered substring.
inline Findings check_span_tiling(const AnnotatedSample& sample) {
  Findings findings;
  const std::string loc = sample.key + "/" + sample.condition().name();
  for (auto seg : {Segment::kStatement, Segment::kQuestion}) {
    const auto text = unicode::decode(sample.segment_text(seg));
    std::vector<const Span*> spans;
    for (const auto& s : sample.annotations) {
      if (s.segment == seg) spans.push_back(&s);
    }
    const auto literals = template_literals(sample.language, sample.order, seg);
    if (spans.size() + 1 != literals.size()) {
      findings.push_back({ErrorCode::kTextMismatch, loc + "/" + std::string(to_string(seg)),
                          "expected " + std::to_string(literals.size() - 1) + " spans, found " +
                              std::to_string(spans.size())});
      continue;
    }
    std::string rebuilt;
    int cursor = 0;
    bool ok = true;
    for (std::size_t i = 0; i <= spans.size(); ++i) {
      const int gap_end = i < spans.size() ? spans[i]->char_start : static_cast<int>(text.size());
      if (gap_end < cursor || gap_end > static_cast<int>(text.size())) {
        ok = false;
        break;
      }
      const auto gap = unicode::encode(std::u32string_view(text).substr(cursor, gap_end - cursor));
      if (gap != literals[i]) {
        findings.push_back({ErrorCode::kTextMismatch, loc, "literal '" + gap +
                                                               "' where template has '" +
                                                               literals[i] + "'"});
      }
      rebuilt += gap;
      if (i == spans.size()) break;
      const auto& s = *spans[i];
      if (s.char_end < s.char_start || s.char_end > static_cast<int>(text.size())) {
        ok = false;
        break;
      }
      const auto piece = unicode::encode(
          std::u32string_view(text).substr(s.char_start, s.char_end - s.char_start));
      if (piece != s.text) {
        findings.push_back({ErrorCode::kTextMismatch, loc + "/" + s.component_id,
                            "span text '" + s.text + "' but rendered '" + piece + "'"});
      }
      rebuilt += piece;
      cursor = s.char_end;
    }
    if (!ok) {
      findings.push_back({ErrorCode::kOffsetRange, loc, "spans unsorted or out of range"});
    } else if (rebuilt != sample.segment_text(seg)) {
      findings.push_back({ErrorCode::kTextMismatch, loc, "tiling does not reconstruct text"});
    }
  }
  return findings;
}

struct AlignmentEntry {
  std::string key;
  Order order = Order::kForward;
  bool ids_match = true;
  bool roles_match = true;
  std::vector<std::string> mismatches;  // component ids or role names
};

struct AlignmentReport {
  std::vector<AlignmentEntry> entries;
  std::size_t keys_checked = 0;
  std::size_t mismatch_count = 0;
  bool pass() const { return mismatch_count == 0; }
};

inline AlignmentReport validate_cross_alignment(const std::vector<AnnotatedSample>& samples) {
  std::map<std::pair<std::string, Order>, std::map<Language, const AnnotatedSample*>> grouped;
  for (const auto& s : samples) grouped[{s.key, s.order}][s.language] = &s;

  AlignmentReport report;
  std::set<std::string> keys;
  for (const auto& [id, by_lang] : grouped) {
    keys.insert(id.first);
    AlignmentEntry entry{id.first, id.second, true, true, {}};
    auto en = by_lang.find(Language::kEn);
    auto zh = by_lang.find(Language::kZh);
    if (en == by_lang.end() || zh == by_lang.end()) {
      entry.ids_match = false;
      entry.mismatches.push_back(en == by_lang.end() ? "missing en sample" : "missing zh sample");
    } else {
      auto shared = [](const AnnotatedSample& s) {
        std::set<std::string> ids;
        for (auto& c : s.component_ids()) {
          if (!component::is_connective(c)) ids.insert(c);
        }
        return ids;
      };
      const auto a = shared(*en->second);
      const auto b = shared(*zh->second);
      std::vector<std::string> diff;
      std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                    std::back_inserter(diff));
      if (!diff.empty()) {
        entry.ids_match = false;
        entry.mismatches.insert(entry.mismatches.end(), diff.begin(), diff.end());
      }
      if (en->second->causal_roles != zh->second->causal_roles) {
        entry.roles_match = false;
        entry.mismatches.push_back("causal_roles");
      }
    }
    report.mismatch_count += entry.mismatches.size();
    report.entries.push_back(std::move(entry));
  }
  report.keys_checked = keys.size();
  return report;
}

// ---------------------------------------------------------------------------
// Lexicon loading

namespace detail {

inline bool contains_word(std::string_view haystack, std::string_view needle) {
  std::string lower(haystack);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::size_t pos = 0;
  while ((pos = lower.find(needle, pos)) != std::string::npos) {
    const bool left = pos == 0 || !std::isalpha(static_cast<unsigned char>(lower[pos - 1]));
    const std::size_t after = pos + needle.size();
    const bool right =
        after >= lower.size() || !std::isalpha(static_cast<unsigned char>(lower[after]));
    if (left && right) return true;
    ++pos;
  }
  return false;
}

// English connectives match as whole words; Chinese ones as substrings.
inline std::optional<std::string> find_connective(std::string_view phrase, Language lang) {
  static const std::array<std::string_view, 6> kEn{"once",   "then",   "if",
                                                   "therefore", "due to", "which originates from"};
  static const std::array<std::string_view, 6> kZh{"一旦", "然后", "如果",
                                                   "因此", "是由于", "而这源自"};
  if (lang == Language::kEn) {
    for (auto c : kEn) {
      if (contains_word(phrase, c)) return std::string(c);
    }
  } else {
    for (auto c : kZh) {
      if (phrase.find(c) != std::string_view::npos) return std::string(c);
    }
  }
  return std::nullopt;
}

}  // namespace detail

inline Findings validate_triple(const CausalTriple& t) {
  Findings findings;
  for (auto lang : kAllLanguages) {
    const auto& steps = t.steps(lang);
    for (std::size_t i = 0; i < 3; ++i) {
      for (const auto* part : {&steps[i].subject, &steps[i].verb}) {
        const std::string where = t.key + "/" + std::string(to_string(lang)) + "/step" +
                                  std::to_string(i + 1) +
                                  (part == &steps[i].subject ? "/subject" : "/verb");
        if (part->empty()) {
          findings.push_back({ErrorCode::kEmptyPhrase, where, "empty phrase"});
        } else if (auto c = detail::find_connective(*part, lang)) {
          findings.push_back({ErrorCode::kConnectiveContamination, where,
                              "phrase '" + *part + "' contains connective '" + *c + "'"});
        }
      }
    }
    if (steps[0] == steps[1] || steps[1] == steps[2] || steps[0] == steps[2]) {
      findings.push_back({ErrorCode::kRepeatedStep, t.key + "/" + std::string(to_string(lang)),
                          "repeated subject-verb pair"});
    }
  }
  return findings;
}

inline Lexicon parse_lexicon(const nlohmann::json& doc, const std::string& origin = "<json>") {
  auto fail = [&](ErrorCode code, const std::string& msg) -> Error {
    return Error(code, origin + ": " + msg);
  };
  if (!doc.is_object() || !doc.contains("domains") || !doc["domains"].is_object()) {
    throw fail(ErrorCode::kParse, "expected an object with a 'domains' object");
  }
  Lexicon lex;
  lex.version = doc.value("version", "");
  lex.provenance = doc.value("provenance", "");

  auto read_steps = [&](const nlohmann::json& j, const std::string& where) {
    std::array<Phrase, 3> steps;
    if (!j.is_object()) throw fail(ErrorCode::kParse, where + ": expected object");
    for (int i = 0; i < 3; ++i) {
      const auto s = "s" + std::to_string(i + 1);
      const auto v = "v" + std::to_string(i + 1);
      if (!j.contains(s) || !j.contains(v) || !j[s].is_string() || !j[v].is_string()) {
        throw fail(ErrorCode::kParse, where + ": missing " + s + "/" + v);
      }
      steps[i] = {j[s].get<std::string>(), j[v].get<std::string>()};
    }
    return steps;
  };

  for (const auto& [name, list] : doc["domains"].items()) {
    if (std::find(kDomains.begin(), kDomains.end(), name) == kDomains.end()) {
      throw fail(ErrorCode::kUnknownDomain, "unknown domain '" + name + "'");
    }
    if (!list.is_array()) throw fail(ErrorCode::kParse, "domain '" + name + "' is not a list");
    auto& triples = lex.domains[name];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& item = list[i];
      const std::string where = "domains." + name + "[" + std::to_string(i) + "]";
      if (!item.is_object() || !item.contains("key") || !item["key"].is_string() ||
          !item.contains("en") || !item.contains("zh")) {
        throw fail(ErrorCode::kParse, where + ": expected {key, en, zh}");
      }
      CausalTriple t;
      t.domain = name;
      t.key = item["key"].get<std::string>();
      t.en = read_steps(item["en"], where + ".en");
      t.zh = read_steps(item["zh"], where + ".zh");
      triples.push_back(std::move(t));
    }
  }

  std::vector<std::string> missing;
  for (auto d : kDomains) {
    if (!lex.domains.count(std::string(d))) missing.emplace_back(d);
  }
  if (lex.domains.size() != kDomains.size()) {
    std::string names;
    for (auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw fail(ErrorCode::kDomainCount, "expected 8 domains, found " +
                                            std::to_string(lex.domains.size()) +
                                            "; missing: " + names);
  }

  std::set<std::string> keys;
  for (const auto* t : lex.ordered()) {
    if (!keys.insert(t->key).second) {
      throw fail(ErrorCode::kDuplicateKey, "duplicate key '" + t->key + "' in " + t->domain);
    }
  }
  for (const auto& [name, triples] : lex.domains) {
    if (triples.size() < 50) {
      throw fail(ErrorCode::kTooFewTriples, "domain '" + name + "' has " +
                                                std::to_string(triples.size()) +
                                                " triples, need at least 50");
    }
  }
  for (const auto* t : lex.ordered()) {
    const auto findings = validate_triple(*t);
    if (!findings.empty()) {
      throw fail(findings.front().code,
                 findings.front().location + ": " + findings.front().message);
    }
  }
  return lex;
}

inline Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open lexicon '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return parse_lexicon(doc, path.string());
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const AnnotatedSample& s) {
  nlohmann::ordered_json j;
  j["key"] = s.key;
  j["domain"] = s.domain;
  j["language"] = to_string(s.language);
  j["order"] = to_string(s.order);
  j["rendered_text"] = s.rendered_text;
  j["question_text"] = s.question_text;
  j["gold_answer"] = s.gold_answer;
  auto spans = nlohmann::ordered_json::array();
  for (const auto& a : s.annotations) {
    nlohmann::ordered_json span;
    span["component_id"] = a.component_id;
    span["segment"] = to_string(a.segment);
    span["char_start"] = a.char_start;
    span["char_end"] = a.char_end;
    span["text"] = a.text;
    spans.push_back(std::move(span));
  }
  j["annotations"] = std::move(spans);
  nlohmann::ordered_json roles;
  for (const auto& [role, pair] : s.causal_roles) {
    roles[std::string(to_string(role))] = {pair.subject_id, pair.verb_id};
  }
  j["causal_roles"] = std::move(roles);
  return j;
}

inline AnnotatedSample sample_from_json(const nlohmann::json& j) {
  AnnotatedSample s;
  try {
    s.key = j.at("key").get<std::string>();
    s.domain = j.value("domain", "");
    s.language = parse_language(j.at("language").get<std::string>());
    s.order = parse_order(j.at("order").get<std::string>());
    s.rendered_text = j.at("rendered_text").get<std::string>();
    s.question_text = j.at("question_text").get<std::string>();
    s.gold_answer = j.at("gold_answer").get<std::string>();
    for (const auto& a : j.at("annotations")) {
      s.annotations.push_back({a.at("component_id").get<std::string>(),
                               parse_segment(a.value("segment", "statement")),
                               a.at("char_start").get<int>(), a.at("char_end").get<int>(),
                               a.value("text", "")});
    }
    for (const auto& [role, pair] : j.at("causal_roles").items()) {
      s.causal_roles[parse_role(role)] = {pair.at(0).get<std::string>(),
                                          pair.at(1).get<std::string>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed sample: ") + e.what());
  }
  return s;
}

inline void write_dataset(const std::filesystem::path& path,
                          const std::vector<AnnotatedSample>& samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

inline std::vector<AnnotatedSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset '" + path.string() + "'");
  std::vector<AnnotatedSample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      samples.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParse,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return samples;
}

}  // namespace causelens
