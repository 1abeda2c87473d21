#pragma once

// Maps annotated component spans onto token indices of a trace bundle.
//
// Membership is by intersection: a token belongs to a component when the
// non-whitespace part of their overlap is non-empty. Tokens whose
// non-whitespace extent is not contained in the span are flagged partial.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "causelens/chaingen.hpp"
#include "causelens/error.hpp"
#include "causelens/traceio.hpp"
#include "causelens/unicode.hpp"

namespace causelens {

struct TokenHit {
  int index = 0;
  bool partial_overlap = false;

  bool operator==(const TokenHit&) const = default;
};

struct ComponentTokenMap {
  std::string sample_key;
  int num_tokens = 0;
  std::map<std::string, std::vector<TokenHit>> components;  // sorted by index
  std::vector<bool> partial_overlap;                        // per token
  Findings findings;

  std::vector<int> indices(const std::string& component_id) const {
    std::vector<int> out;
    auto it = components.find(component_id);
    if (it == components.end()) return out;
    for (const auto& hit : it->second) out.push_back(hit.index);
    return out;
  }
};

// Token spans with surrounding whitespace removed; empty tokens keep
// start == end.
struct CoreSpan {
  int start = 0;
  int end = 0;
};

namespace detail {

inline std::vector<CoreSpan> token_cores(const std::u32string& prompt,
                                         const std::vector<Token>& tokens) {
  std::vector<CoreSpan> cores;
  cores.reserve(tokens.size());
  for (const auto& t : tokens) {
    int s = std::clamp(t.char_start, 0, static_cast<int>(prompt.size()));
    int e = std::clamp(t.char_end, s, static_cast<int>(prompt.size()));
    while (s < e && unicode::is_whitespace(prompt[s])) ++s;
    while (e > s && unicode::is_whitespace(prompt[e - 1])) --e;
    cores.push_back({s, e});
  }
  return cores;
}

// True when [a0, a1) and [b0, b1) share a non-whitespace character.
inline bool shares_text(const std::u32string& prompt, int a0, int a1, int b0, int b1) {
  const int lo = std::max({a0, b0, 0});
  const int hi = std::min({a1, b1, static_cast<int>(prompt.size())});
  for (int c = lo; c < hi; ++c) {
    if (!unicode::is_whitespace(prompt[c])) return true;
  }
  return false;
}

}  // namespace detail

inline ComponentTokenMap map_components(const TraceBundle& trace, const AnnotatedSample& sample) {
  if (trace.sample_key != sample.key) {
    throw Error(ErrorCode::kKeyMismatch, "trace key '" + trace.sample_key +
                                             "' does not match sample key '" + sample.key + "'");
  }
  const auto prompt = unicode::decode(trace.prompt_text);
  for (auto seg : {Segment::kStatement, Segment::kQuestion}) {
    const auto text = unicode::decode(sample.segment_text(seg));
    const int offset = seg == Segment::kStatement ? trace.statement_offset : trace.question_offset;
    if (offset < 0 || offset + text.size() > prompt.size() ||
        prompt.compare(offset, text.size(), text) != 0) {
      throw Error(ErrorCode::kTextMismatch,
                  sample.key + ": prompt does not contain the " + std::string(to_string(seg)) +
                      " text at offset " + std::to_string(offset));
    }
  }

  ComponentTokenMap map;
  map.sample_key = sample.key;
  map.num_tokens = trace.num_tokens();
  map.partial_overlap.assign(trace.tokens.size(), false);
  const auto cores = detail::token_cores(prompt, trace.tokens);

  for (const auto& span : sample.annotations) {
    const int offset =
        span.segment == Segment::kStatement ? trace.statement_offset : trace.question_offset;
    const int cs = offset + span.char_start;
    const int ce = offset + span.char_end;
    auto& hits = map.components[span.component_id];
    for (int t = 0; t < map.num_tokens; ++t) {
      const auto& tok = trace.tokens[t];
      if (!detail::shares_text(prompt, tok.char_start, tok.char_end, cs, ce)) continue;
      const bool partial = cores[t].start < cs || cores[t].end > ce;
      hits.push_back({t, partial});
      if (partial) map.partial_overlap[t] = true;
    }
    if (hits.empty()) {
      map.findings.push_back({ErrorCode::kEmptyComponent, sample.key + "/" + span.component_id,
                              "span [" + std::to_string(span.char_start) + "," +
                                  std::to_string(span.char_end) + ") intersects no token"});
    }
  }
  return map;
}

inline std::map<Role, std::vector<int>> causal_role_sets(const ComponentTokenMap& map,
                                                         const AnnotatedSample& sample) {
  std::map<Role, std::vector<int>> out;
  for (auto role : kAllRoles) {
    auto it = sample.causal_roles.find(role);
    if (it == sample.causal_roles.end()) {
      throw Error(ErrorCode::kMissingRole,
                  sample.key + ": no '" + std::string(to_string(role)) + "' role");
    }
    std::set<int> merged;
    for (const auto* id : {&it->second.subject_id, &it->second.verb_id}) {
      if (!map.components.count(*id)) {
        throw Error(ErrorCode::kMissingRole, sample.key + ": role '" +
                                                 std::string(to_string(role)) +
                                                 "' refers to unannotated component '" + *id +
                                                 "'");
      }
      for (int idx : map.indices(*id)) merged.insert(idx);
    }
    out[role].assign(merged.begin(), merged.end());
  }
  return out;
}

// Index of the last non-punctuation token whose text lies inside the chain
// statement.
inline std::optional<int> final_chain_token(const TraceBundle& trace,
                                            const std::string& statement_text) {
  const auto prompt = unicode::decode(trace.prompt_text);
  const int start = trace.statement_offset;
  const int end = std::min(start + static_cast<int>(unicode::length(statement_text)),
                           static_cast<int>(prompt.size()));
  std::optional<int> best;
  for (int t = 0; t < trace.num_tokens(); ++t) {
    const auto& tok = trace.tokens[t];
    bool content = false;
    for (int c = std::max(tok.char_start, start); c < std::min(tok.char_end, end); ++c) {
      if (c < 0) continue;
      if (!unicode::is_whitespace(prompt[c]) && !unicode::is_punctuation(prompt[c])) {
        content = true;
        break;
      }
    }
    if (content) best = t;
  }
  return best;
}

inline nlohmann::ordered_json to_json(const ComponentTokenMap& map) {
  nlohmann::ordered_json j;
  j["sample_key"] = map.sample_key;
  j["num_tokens"] = map.num_tokens;
  nlohmann::ordered_json comps = nlohmann::ordered_json::object();
  for (const auto& [id, hits] : map.components) {
    nlohmann::ordered_json entry;
    auto idx = nlohmann::ordered_json::array();
    auto partial = nlohmann::ordered_json::array();
    for (const auto& h : hits) {
      idx.push_back(h.index);
      if (h.partial_overlap) partial.push_back(h.index);
    }
    entry["indices"] = std::move(idx);
    entry["partial"] = std::move(partial);
    comps[id] = std::move(entry);
  }
  j["components"] = std::move(comps);
  auto findings = nlohmann::ordered_json::array();
  for (const auto& f : map.findings) {
    findings.push_back({{"code", to_string(f.code)}, {"location", f.location}, {"message", f.message}});
  }
  j["findings"] = std::move(findings);
  return j;
}

}  // namespace causelens
