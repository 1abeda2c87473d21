#include <gtest/gtest.h>

#include <cstring>

#include "helpers.hpp"

using namespace causelens;
namespace fs = std::filesystem;

namespace {

ErrorCode read_error(const fs::path& dir) {
  try {
    read_trace(dir);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "read_trace accepted " << dir;
  return ErrorCode::kIo;
}

// Rewrites a blob file and patches its checksum so that only the payload
// fault remains.
void rewrite_blob(const fs::path& dir, const std::string& file, const std::vector<float>& values,
                  const std::string& manifest_key) {
  const auto bytes = detail::to_le_bytes(values);
  testutil::spit(dir / file, std::string(bytes.begin(), bytes.end()));
  auto m = nlohmann::json::parse(testutil::slurp(dir / "manifest.json"));
  m["blobs"][manifest_key]["crc32"] = detail::crc32(bytes.data(), bytes.size());
  testutil::spit(dir / "manifest.json", m.dump(2));
}

}  // namespace

TEST(TraceIo, RoundTripIsBitIdentical) {
  testutil::TempDir dir;
  const auto b = random_bundle(24, 16, 20, 32, 7);
  write_trace(b, dir / "b");
  for (const char* f : {"manifest.json", "attention.bin", "hidden_final_chain.bin", "hidden_last.bin"}) {
    EXPECT_TRUE(fs::exists(dir / "b" / f)) << f;
  }
  EXPECT_EQ(fs::file_size(dir / "b" / "attention.bin"), 24u * 16 * 20 * 20 * 4);
  const auto r = read_trace(dir / "b");
  EXPECT_EQ(r, b);
  EXPECT_EQ(0, std::memcmp(r.attention.values().data(), b.attention.values().data(),
                           b.attention.values().size() * sizeof(float)));
  EXPECT_TRUE(validate_trace(dir / "b").empty());
}

TEST(TraceIo, WriteRefusesMaskViolation) {
  testutil::TempDir dir;
  auto b = random_bundle(2, 2, 6, 4, 1);
  b.attention.at(1, 0, 2, 4) = 0.1f;
  try {
    write_trace(b, dir / "b");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCausalMask);
  }
  EXPECT_FALSE(fs::exists(dir / "b" / "manifest.json"));
}

TEST(TraceIo, WriteRefusesAnchorOutOfRange) {
  testutil::TempDir dir;
  auto b = random_bundle(2, 2, 6, 4, 1);
  b.anchor_positions["final_prompt_token"] = 6;
  try {
    write_trace(b, dir / "b");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAnchorOutOfRange);
  }
}

TEST(TraceIo, ReadRejectsMaskViolationOnDisk) {
  testutil::TempDir dir;
  auto b = random_bundle(2, 2, 6, 4, 2);
  write_trace(b, dir / "b");
  auto values = b.attention.values();
  // Move mass from the diagonal into the masked triangle; row sum unchanged.
  const std::size_t row = 2 * 6;
  values[row + 2] -= 0.05f;
  values[row + 3] += 0.05f;
  rewrite_blob(dir / "b", "attention.bin", values, "attention");
  EXPECT_EQ(read_error(dir / "b"), ErrorCode::kCausalMask);
  EXPECT_TRUE(has_finding(validate_trace(dir / "b"), ErrorCode::kCausalMask));
}

TEST(TraceIo, ReadRejectsTruncatedBlob) {
  testutil::TempDir dir;
  write_trace(random_bundle(2, 2, 6, 4, 3), dir / "b");
  const auto bytes = testutil::slurp(dir / "b" / "attention.bin");
  testutil::spit(dir / "b" / "attention.bin", bytes.substr(0, bytes.size() - 4));
  EXPECT_EQ(read_error(dir / "b"), ErrorCode::kShapeMismatch);
}

TEST(TraceIo, ReadRejectsBadChecksum) {
  testutil::TempDir dir;
  write_trace(random_bundle(2, 2, 6, 4, 4), dir / "b");
  auto bytes = testutil::slurp(dir / "b" / "hidden_last.bin");
  bytes[5] = static_cast<char>(bytes[5] ^ 0x01);
  testutil::spit(dir / "b" / "hidden_last.bin", bytes);
  EXPECT_EQ(read_error(dir / "b"), ErrorCode::kChecksumMismatch);
}

TEST(TraceIo, ReadRejectsUnsupportedVersion) {
  testutil::TempDir dir;
  write_trace(random_bundle(2, 2, 6, 4, 5), dir / "b");
  testutil::replace_in_file(dir / "b" / "manifest.json", "\"format_version\": \"1\"",
                            "\"format_version\": \"99\"");
  EXPECT_EQ(read_error(dir / "b"), ErrorCode::kUnsupportedVersion);
}

TEST(TraceIo, ValidateReportsRowNormalizationPerHead) {
  testutil::TempDir dir;
  auto b = random_bundle(2, 3, 5, 4, 6);
  write_trace(b, dir / "b");
  auto values = b.attention.values();
  for (auto& v : values) v *= 0.5f;
  rewrite_blob(dir / "b", "attention.bin", values, "attention");
  const auto f = validate_trace(dir / "b");
  int count = 0;
  for (const auto& x : f) count += x.code == ErrorCode::kRowNormalization;
  EXPECT_EQ(count, 2 * 3);
}

TEST(TraceIo, ValidateReportsMissingHiddenBlob) {
  testutil::TempDir dir;
  write_trace(random_bundle(2, 2, 6, 4, 8), dir / "b");
  auto m = nlohmann::json::parse(testutil::slurp(dir / "b" / "manifest.json"));
  m["blobs"].erase("hidden.final_chain_token");
  testutil::spit(dir / "b" / "manifest.json", m.dump(2));
  EXPECT_TRUE(has_finding(validate_trace(dir / "b"), ErrorCode::kMissingBlob));

  testutil::TempDir dir2;
  write_trace(random_bundle(2, 2, 6, 4, 9), dir2 / "b");
  fs::remove(dir2 / "b" / "hidden_last.bin");
  EXPECT_TRUE(has_finding(validate_trace(dir2 / "b"), ErrorCode::kMissingBlob));
}

TEST(TraceIo, ValidationIsTotal) {
  testutil::TempDir dir;
  EXPECT_FALSE(validate_trace(dir / "nothing-here").empty());
  fs::create_directories(dir / "garbage");
  testutil::spit(dir / "garbage" / "manifest.json", "[1, 2");
  EXPECT_TRUE(has_finding(validate_trace(dir / "garbage"), ErrorCode::kParse));
  testutil::spit(dir / "garbage" / "manifest.json", "{\"format_version\": \"1\"}");
  EXPECT_FALSE(validate_trace(dir / "garbage").empty());
  testutil::spit(dir / "garbage" / "manifest.json",
                 "{\"format_version\": \"1\", \"sample_key\": 3, \"blobs\": []}");
  EXPECT_FALSE(validate_trace(dir / "garbage").empty());
}

TEST(TraceIo, NonFiniteValuesAreFindings) {
  auto b = random_bundle(1, 1, 4, 2, 10);
  b.attention.at(0, 0, 2, 1) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_TRUE(has_finding(check_trace(b), ErrorCode::kNonFinite));
}

TEST(TraceIo, OffsetsMustBeNonDecreasingAndInside) {
  auto b = random_bundle(1, 1, 4, 2, 11);
  std::swap(b.tokens[1], b.tokens[2]);
  EXPECT_TRUE(has_finding(check_trace(b), ErrorCode::kOffsetRange));
  auto c = random_bundle(1, 1, 4, 2, 11);
  c.tokens.back().char_end += 10;
  EXPECT_TRUE(has_finding(check_trace(c), ErrorCode::kOffsetRange));
}

// The committed fixture pins the on-disk format: it must keep loading and
// keep matching what the synthetic generator produces for the same sample.
TEST(TraceIo, GoldenFixtureLoads) {
  const fs::path dir = fs::path(CAUSELENS_FIXTURES) / "golden" / "en-fwd" / "house-001";
  const auto b = read_trace(dir);
  EXPECT_EQ(b.sample_key, "house-001");
  EXPECT_EQ(b.model.num_layers, 4);
  EXPECT_EQ(b.model.num_heads, 2);
  const auto lex = load_lexicon(testutil::lexicon_path());
  const auto sample = render_chain(*lex.ordered().front(), Language::kEn, Order::kForward);
  SynthOptions o;
  o.model = {"synthetic-golden", 4, 2, 8};
  EXPECT_EQ(synthesize_trace(sample, o), b);
}
