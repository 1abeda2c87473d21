#pragma once

// Deterministic synthetic trace bundles.
//
// These stand in for model extraction when no model is available. Attention
// is a causal softmax over per-token scores that depend on the component a
// token belongs to, the layer, and the language; hidden states mix a
// sample-level vector shared across conditions with language and order
// specific parts whose weight shrinks in later layers. Values carry no
// claim about any real model; they only exercise the analysis code.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "causelens/align.hpp"
#include "causelens/chaingen.hpp"
#include "causelens/traceio.hpp"
#include "causelens/unicode.hpp"

namespace causelens {

struct SynthOptions {
  ModelMeta model{"synthetic-l24h4", 24, 4, 32};
  std::uint64_t seed = 20240601;
  std::string prompt_prefix = "<user> ";
  std::string prompt_suffix = " <assistant>";
  // Probability that the synthetic answer is correct, per condition name.
  std::map<std::string, double> accuracy{
      {"en-fwd", 0.91}, {"zh-fwd", 0.91}, {"en-rev", 0.885}, {"zh-rev", 0.77}};
  double attention_noise = 0.25;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Independent stream per (seed, labels...).
inline std::mt19937_64 stream(std::uint64_t seed, std::initializer_list<std::string_view> labels) {
  std::uint64_t h = fnv1a(std::to_string(seed));
  for (auto l : labels) h = fnv1a(l, fnv1a("|", h));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

inline bool is_ascii_alnum(char32_t c) {
  return (c >= U'0' && c <= U'9') || (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
}

}  // namespace detail

// Splits into ASCII alphanumeric runs and single other characters; leading
// whitespace attaches to the following token.
inline std::vector<Token> synth_tokenize(std::string_view text) {
  const auto chars = unicode::decode(text);
  const int n = static_cast<int>(chars.size());
  std::vector<Token> tokens;
  int i = 0;
  while (i < n) {
    const int start = i;
    while (i < n && unicode::is_whitespace(chars[i])) ++i;
    if (i == n) {
      if (!tokens.empty()) {
        tokens.back().char_end = n;
      } else {
        tokens.push_back({{}, start, n});
      }
      break;
    }
    if (detail::is_ascii_alnum(chars[i])) {
      while (i < n && detail::is_ascii_alnum(chars[i])) ++i;
    } else {
      ++i;
    }
    tokens.push_back({{}, start, i});
  }
  for (auto& t : tokens) {
    t.text = unicode::encode(std::u32string_view(chars).substr(t.char_start, t.char_end - t.char_start));
  }
  return tokens;
}

namespace detail {

// Base score of a token given the components it belongs to.
inline double component_score(const std::vector<std::string>& ids, double t, Language lang,
                              bool sentence_initial) {
  using namespace component;
  if (ids.empty()) return -0.6;
  const bool zh = lang == Language::kZh;
  double best = -1e9;
  for (const auto& id : ids) {
    double s = 0.0;
    const bool subj = id == kCauseSubj || id == kInterSubj || id == kFinalSubj || id == kQSubj;
    const bool verb = id == kCauseVerb || id == kInterVerb || id == kFinalVerb || id == kQVerb;
    if (subj) {
      s = 0.5 + 0.8 * std::sin(std::numbers::pi * t) + (zh ? 0.35 : 0.0);
    } else if (verb) {
      s = 0.4 + 0.6 * t - (zh ? 0.25 : 0.0);
    } else {
      s = 0.2 + 0.8 * (1.0 - t);
      if (id == kOnce || id == kIf) s += zh ? 0.2 : 0.0;
      if (id == kThen || id == kTherefore) s -= zh ? 0.2 : 0.0;
    }
    if (id == kCauseSubj || id == kCauseVerb) s += 0.25 * (1.0 - t);
    best = std::max(best, s);
  }
  if (sentence_initial) best += zh ? 0.6 : 0.3;
  return best;
}

}  // namespace detail

inline std::string synth_answer(const AnnotatedSample& sample, bool correct, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 1);
  const bool wrap = pick(rng) == 1;
  if (correct) {
    if (sample.language == Language::kEn) {
      if (!wrap) return sample.gold_answer;
      auto gold = unicode::decode(sample.gold_answer);
      if (!gold.empty()) gold[0] = unicode::ascii_lower(gold[0]);
      return "The final result is that " + unicode::encode(gold);
    }
    return wrap ? "最终结果是" + sample.gold_answer + "。" : sample.gold_answer + "。";
  }
  const Span* s = sample.find(component::kInterSubj);
  const Span* v = sample.find(component::kInterVerb);
  if (s == nullptr || v == nullptr) return {};
  if (sample.language == Language::kEn) {
    return unicode::capitalize_first(s->text) + " " + v->text + ".";
  }
  return s->text + v->text + "。";
}

inline TraceBundle synthesize_trace(const AnnotatedSample& sample, const SynthOptions& opt) {
  const auto cond = sample.condition().name();
  TraceBundle b;
  b.sample_key = sample.key;
  b.language = sample.language;
  b.order = sample.order;
  b.model = opt.model;
  const std::string sep = sample.language == Language::kEn ? " " : "";
  b.prompt_text = opt.prompt_prefix + sample.rendered_text + sep + sample.question_text +
                  opt.prompt_suffix;
  b.statement_offset = static_cast<int>(unicode::length(opt.prompt_prefix));
  b.question_offset =
      b.statement_offset + static_cast<int>(unicode::length(sample.rendered_text + sep));
  b.tokens = synth_tokenize(b.prompt_text);
  const int L = opt.model.num_layers, H = opt.model.num_heads, D = opt.model.hidden_dim;
  const int T = b.num_tokens();

  // Component membership per token.
  const auto map = map_components(b, sample);
  std::vector<std::vector<std::string>> ids(static_cast<std::size_t>(T));
  for (const auto& [id, hits] : map.components) {
    for (const auto& h : hits) ids[static_cast<std::size_t>(h.index)].push_back(id);
  }
  const std::string first_slot =
      detail::statement_template(sample.language, sample.order).slots.front();
  std::vector<bool> initial(static_cast<std::size_t>(T), false);
  for (int idx : map.indices(first_slot)) initial[static_cast<std::size_t>(idx)] = true;

  b.attention = Attention(L, H, T);
  auto rng = detail::stream(opt.seed, {"attention", sample.key, cond});
  std::normal_distribution<double> noise(0.0, opt.attention_noise);
  std::vector<double> score(static_cast<std::size_t>(T));
  std::vector<double> row(static_cast<std::size_t>(T));
  for (int l = 0; l < L; ++l) {
    const double t = L > 1 ? static_cast<double>(l) / (L - 1) : 0.0;
    for (int h = 0; h < H; ++h) {
      const double head_gain = 0.6 + 0.8 * static_cast<double>(h + 1) / (H + 1);
      for (int k = 0; k < T; ++k) {
        score[k] = head_gain * detail::component_score(ids[k], t, sample.language, initial[k]) +
                   noise(rng);
      }
      score[0] += 1.5;  // attention sink on the first token
      float* M = b.attention.head(l, h);
      for (int j = 0; j < T; ++j) {
        double mx = -1e300;
        for (int k = 0; k <= j; ++k) {
          row[k] = score[k] - 0.04 * (j - k) + 0.5 * noise(rng);
          mx = std::max(mx, row[k]);
        }
        double z = 0.0;
        for (int k = 0; k <= j; ++k) z += (row[k] = std::exp(row[k] - mx));
        for (int k = 0; k <= j; ++k) M[static_cast<std::size_t>(j) * T + k] = static_cast<float>(row[k] / z);
      }
    }
  }

  // Anchors and hidden states.
  const auto chain_end = final_chain_token(b, sample.rendered_text);
  b.anchor_positions[std::string(anchor::kFinalChainToken)] = chain_end.value_or(T - 1);
  b.anchor_positions[std::string(anchor::kFinalPromptToken)] = T - 1;

  const auto lang = std::string(to_string(sample.language));
  const auto order = std::string(to_string(sample.order));
  for (const auto& [name, pos] : b.anchor_positions) {
    auto draw = [&](std::initializer_list<std::string_view> labels) {
      auto r = detail::stream(opt.seed, labels);
      std::normal_distribution<double> n01(0.0, 1.0);
      std::vector<double> v(static_cast<std::size_t>(D));
      for (auto& x : v) x = n01(r);
      return v;
    };
    const auto shared = draw({"hidden", name, sample.key});
    const auto by_lang = draw({"hidden", name, sample.key, lang});
    const auto by_order = draw({"hidden", name, sample.key, order});
    auto rn = detail::stream(opt.seed, {"hidden-noise", name, sample.key, cond});
    std::normal_distribution<double> n01(0.0, 1.0);
    HiddenStates hs{L + 1, D, std::vector<float>(static_cast<std::size_t>(L + 1) * D)};
    for (int l = 0; l <= L; ++l) {
      const double t = static_cast<double>(l) / L;
      const double a = 0.3 + 1.2 * t, wl = 0.7 * (1.0 - 0.6 * t), wo = 1.0 * (1.0 - 0.6 * t);
      for (int d = 0; d < D; ++d) {
        hs.data[static_cast<std::size_t>(l) * D + d] = static_cast<float>(
            a * shared[d] + wl * by_lang[d] + wo * by_order[d] + 0.3 * n01(rn));
      }
    }
    b.hidden[name] = std::move(hs);
  }

  auto ra = detail::stream(opt.seed, {"answer", sample.key, cond});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto acc = opt.accuracy.find(cond);
  const bool correct = u(ra) < (acc == opt.accuracy.end() ? 1.0 : acc->second);
  b.generated_answer = synth_answer(sample, correct, ra);
  return b;
}

// Generic bundle with a word prompt, independent of the dataset: used for
// format fixtures where only the shape matters.
inline TraceBundle random_bundle(int layers, int heads, int tokens, int hidden_dim,
                                 std::uint64_t seed) {
  TraceBundle b;
  b.sample_key = "fixture-" + std::to_string(seed);
  b.model = {"fixture", layers, heads, hidden_dim};
  std::string prompt;
  for (int i = 0; i < tokens; ++i) prompt += (i ? " w" : "w") + std::to_string(i);
  b.prompt_text = prompt;
  b.tokens = synth_tokenize(prompt);
  b.statement_offset = 0;
  b.question_offset = b.tokens[static_cast<std::size_t>(tokens / 2)].char_start;
  b.attention = Attention(layers, heads, tokens);
  auto rng = detail::stream(seed, {"random-bundle"});
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> row(static_cast<std::size_t>(tokens));
  for (int l = 0; l < layers; ++l) {
    for (int h = 0; h < heads; ++h) {
      float* M = b.attention.head(l, h);
      for (int j = 0; j < tokens; ++j) {
        double z = 0.0;
        for (int k = 0; k <= j; ++k) z += (row[k] = u(rng));
        for (int k = 0; k <= j; ++k) M[static_cast<std::size_t>(j) * tokens + k] = static_cast<float>(row[k] / z);
      }
    }
  }
  b.anchor_positions[std::string(anchor::kFinalChainToken)] = tokens / 2 - 1;
  b.anchor_positions[std::string(anchor::kFinalPromptToken)] = tokens - 1;
  std::normal_distribution<double> n01(0.0, 1.0);
  for (const auto& [name, _] : b.anchor_positions) {
    HiddenStates hs{layers + 1, hidden_dim,
                    std::vector<float>(static_cast<std::size_t>(layers + 1) * hidden_dim)};
    for (auto& x : hs.data) x = static_cast<float>(n01(rng));
    b.hidden[name] = std::move(hs);
  }
  b.generated_answer = "w" + std::to_string(tokens - 1);
  return b;
}

}  // namespace causelens
