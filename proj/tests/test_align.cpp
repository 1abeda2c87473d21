#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace causelens;

namespace {

// A bundle whose prompt is prefix + statement + separator + question; with
// no tokens given, the prompt is tokenized by the synthetic tokenizer. Attention and hidden states are irrelevant for alignment.
TraceBundle bundle_for(const AnnotatedSample& s, std::vector<Token> tokens, std::string prefix = "") {
  TraceBundle b;
  b.sample_key = s.key;
  b.language = s.language;
  b.order = s.order;
  const std::string sep = s.language == Language::kEn ? " " : "";
  b.prompt_text = prefix + s.rendered_text + sep + s.question_text;
  b.statement_offset = static_cast<int>(unicode::length(prefix));
  b.question_offset = b.statement_offset + static_cast<int>(unicode::length(s.rendered_text + sep));
  b.tokens = tokens.empty() ? synth_tokenize(b.prompt_text) : std::move(tokens);
  return b;
}

std::vector<std::string> texts(const TraceBundle& b, const std::vector<int>& idx) {
  std::vector<std::string> out;
  for (int i : idx) out.push_back(b.tokens[static_cast<std::size_t>(i)].text);
  return out;
}

}  // namespace

TEST(Align, EnglishWordTokens) {
  const auto s = render_chain(testutil::toaster(), Language::kEn, Order::kForward);
  const auto b = bundle_for(s, synth_tokenize(s.rendered_text + " " + s.question_text));
  const auto m = map_components(b, s);
  EXPECT_EQ(texts(b, m.indices("cause_subj")), std::vector<std::string>{" toaster"});
  EXPECT_EQ(texts(b, m.indices("final_result_trigger")),
            (std::vector<std::string>{" final", " result"}));
  EXPECT_EQ(texts(b, m.indices("q_verb")), std::vector<std::string>{" heats"});
  // Leading-space tokens are not partial: their non-space core is inside.
  for (bool p : m.partial_overlap) EXPECT_FALSE(p);
  EXPECT_TRUE(m.findings.empty());
  EXPECT_EQ(m.components.size(), 13u);
}

TEST(Align, ChineseCharacterTokens) {
  const auto s = render_chain(testutil::toaster(), Language::kZh, Order::kForward);
  const auto b = bundle_for(s, {}, "<user> ");
  const auto m = map_components(b, s);
  EXPECT_EQ(texts(b, m.indices("cause_subj")), (std::vector<std::string>{"面", "包", "机"}));
  EXPECT_EQ(texts(b, m.indices("then")), (std::vector<std::string>{"然", "后"}));
}

TEST(Align, ExactBoundaryHasNoFlags) {
  // Span [5,18) covering exactly tokens 3 and 4.
  AnnotatedSample s;
  s.key = "k";
  s.rendered_text = "aa bbcccccdddddddddd ee";
  s.annotations = {{"x", Segment::kStatement, 5, 18, ""}};
  TraceBundle b;
  b.sample_key = "k";
  b.prompt_text = s.rendered_text;
  b.question_offset = static_cast<int>(s.rendered_text.size());
  b.tokens = {{"aa", 0, 2}, {" ", 2, 3}, {"bb", 3, 5}, {"ccccc", 5, 10}, {"dddddddd", 10, 18},
              {"dd ee", 18, 23}};
  const auto m = map_components(b, s);
  EXPECT_EQ(m.indices("x"), (std::vector<int>{3, 4}));
  for (const auto& h : m.components.at("x")) EXPECT_FALSE(h.partial_overlap);
}

TEST(Align, SubwordStraddleIsPartial) {
  AnnotatedSample s;
  s.key = "k";
  s.rendered_text = "abcdefghij";
  s.annotations = {{"x", Segment::kStatement, 5, 9, ""}, {"y", Segment::kStatement, 0, 5, ""}};
  TraceBundle b;
  b.sample_key = "k";
  b.prompt_text = s.rendered_text;
  b.question_offset = 10;
  b.tokens = {{"abcd", 0, 4}, {"efg", 4, 7}, {"hij", 7, 10}};
  const auto m = map_components(b, s);
  EXPECT_EQ(m.indices("x"), (std::vector<int>{1, 2}));
  EXPECT_TRUE(m.components.at("x")[0].partial_overlap);
  EXPECT_TRUE(m.components.at("x")[1].partial_overlap);
  // Token 1 straddles both spans and carries the flag in both entries.
  EXPECT_EQ(m.indices("y"), (std::vector<int>{0, 1}));
  EXPECT_TRUE(m.components.at("y")[1].partial_overlap);
  EXPECT_FALSE(m.components.at("y")[0].partial_overlap);
  EXPECT_TRUE(m.partial_overlap[1]);
}

TEST(Align, ZeroWidthSpanGivesFindingNotCrash) {
  AnnotatedSample s;
  s.key = "k";
  s.rendered_text = "abcdefghijkl";
  s.annotations = {{"z", Segment::kStatement, 9, 9, ""}};
  TraceBundle b;
  b.sample_key = "k";
  b.prompt_text = s.rendered_text;
  b.question_offset = 12;
  b.tokens = {{"abcdefghijkl", 0, 12}};
  const auto m = map_components(b, s);
  ASSERT_TRUE(m.components.count("z"));
  EXPECT_TRUE(m.components.at("z").empty());
  EXPECT_TRUE(has_finding(m.findings, ErrorCode::kEmptyComponent));
}

TEST(Align, WhitespaceOnlyOverlapDoesNotCount) {
  AnnotatedSample s;
  s.key = "k";
  s.rendered_text = "ab cd";
  s.annotations = {{"x", Segment::kStatement, 2, 5, " cd"}};
  TraceBundle b;
  b.sample_key = "k";
  b.prompt_text = s.rendered_text;
  b.question_offset = 5;
  b.tokens = {{"ab ", 0, 3}, {"cd", 3, 5}};
  // Token 0 shares only the space with the span.
  EXPECT_EQ(map_components(b, s).indices("x"), std::vector<int>{1});
  b.tokens = {{"ab", 0, 2}, {" cd", 2, 5}};
  s.annotations = {{"x", Segment::kStatement, 3, 5, "cd"}};
  const auto m = map_components(b, s);
  EXPECT_EQ(m.indices("x"), std::vector<int>{1});
}

TEST(Align, KeyAndTextMismatchAreErrors) {
  const auto s = render_chain(testutil::toaster(), Language::kEn, Order::kForward);
  auto b = bundle_for(s, synth_tokenize(s.rendered_text + " " + s.question_text));
  b.sample_key = "other";
  try {
    map_components(b, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kKeyMismatch);
  }
  b.sample_key = s.key;
  b.question_offset += 1;
  try {
    map_components(b, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTextMismatch);
  }
}

TEST(Align, CausalRoleSets) {
  const auto fwd = render_chain(testutil::toaster(), Language::kEn, Order::kForward);
  const auto bf = bundle_for(fwd, synth_tokenize(fwd.rendered_text + " " + fwd.question_text));
  const auto rf = causal_role_sets(map_components(bf, fwd), fwd);
  EXPECT_EQ(texts(bf, rf.at(Role::kCause)), (std::vector<std::string>{" toaster", " heats"}));

  const auto rev = render_chain(testutil::toaster(), Language::kEn, Order::kReversed);
  const auto br = bundle_for(rev, synth_tokenize(rev.rendered_text + " " + rev.question_text));
  const auto rr = causal_role_sets(map_components(br, rev), rev);
  EXPECT_EQ(texts(br, rr.at(Role::kFinal)), (std::vector<std::string>{"Aroma", " spreads"}));
  EXPECT_EQ(rr.at(Role::kFinal), (std::vector<int>{0, 1}));

  auto broken = fwd;
  broken.causal_roles.erase(Role::kIntermediate);
  try {
    causal_role_sets(map_components(bf, broken), broken);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingRole);
  }
}

TEST(Align, ConnectivesNeverInSubjectOrVerbSets) {
  const auto lex = load_lexicon(testutil::lexicon_path());
  const auto samples = generate_dataset(lex, {Language::kEn, Language::kZh},
                                        {Order::kForward, Order::kReversed});
  for (std::size_t i = 0; i < samples.size(); i += 37) {
    const auto& s = samples[i];
    const std::string sep = s.language == Language::kEn ? " " : "";
    const auto b = bundle_for(s, synth_tokenize(s.rendered_text + sep + s.question_text));
    const auto m = map_components(b, s);
    std::set<int> content, connective;
    for (const auto& [id, hits] : m.components) {
      for (const auto& h : hits) (component::is_connective(id) ? connective : content).insert(h.index);
    }
    for (int c : connective) EXPECT_FALSE(content.count(c)) << s.key << " token " << c;
  }
}

TEST(Align, RefiningTokenizationKeepsCharacterAttribution) {
  const auto s = render_chain(testutil::toaster(), Language::kEn, Order::kForward);
  const std::string prompt = s.rendered_text + " " + s.question_text;
  const auto coarse = synth_tokenize(prompt);
  // Split every multi-character token into single characters.
  std::vector<Token> fine;
  const auto chars = unicode::decode(prompt);
  for (const auto& t : coarse) {
    for (int c = t.char_start; c < t.char_end; ++c) {
      fine.push_back({unicode::encode(std::u32string(1, chars[c])), c, c + 1});
    }
  }
  const auto b1 = bundle_for(s, coarse), b2 = bundle_for(s, fine);
  const auto m1 = map_components(b1, s), m2 = map_components(b2, s);
  auto covered = [&](const TraceBundle& b, const std::vector<int>& idx) {
    std::set<int> out;
    for (int i : idx) {
      for (int c = b.tokens[i].char_start; c < b.tokens[i].char_end; ++c) {
        if (!unicode::is_whitespace(chars[c])) out.insert(c);
      }
    }
    return out;
  };
  for (const auto& [id, _] : m1.components) {
    EXPECT_EQ(covered(b1, m1.indices(id)), covered(b2, m2.indices(id))) << id;
  }
}

TEST(Align, FinalChainTokenSkipsPunctuation) {
  const auto en = render_chain(testutil::toaster(), Language::kEn, Order::kForward);
  const auto b = bundle_for(en, synth_tokenize(en.rendered_text + " " + en.question_text));
  const auto idx = final_chain_token(b, en.rendered_text);
  ASSERT_TRUE(idx.has_value());
  EXPECT_EQ(b.tokens[*idx].text, " spreads");

  const auto zh = render_chain(testutil::toaster(), Language::kZh, Order::kReversed);
  const auto bz = bundle_for(zh, synth_tokenize(zh.rendered_text + zh.question_text));
  const auto iz = final_chain_token(bz, zh.rendered_text);
  ASSERT_TRUE(iz.has_value());
  EXPECT_EQ(bz.tokens[*iz].text, "热");
}
