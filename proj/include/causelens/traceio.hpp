#pragma once

// Trace bundles: the on-disk boundary between model extraction and analysis.
//
// A bundle is a directory holding manifest.json plus one raw blob per tensor
// (little-endian float32, row-major). See docs/trace_format.md.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/crc.hpp>
#include "json.hpp"

#include "causelens/chaingen.hpp"
#include "causelens/error.hpp"
#include "causelens/unicode.hpp"

namespace causelens {

inline constexpr std::string_view kTraceFormatVersion = "1";
inline constexpr double kRowSumTolerance = 1e-3;

namespace anchor {
inline constexpr std::string_view kFinalChainToken = "final_chain_token";
inline constexpr std::string_view kFinalPromptToken = "final_prompt_token";
}  // namespace anchor

struct ModelMeta {
  std::string id;
  int num_layers = 0;
  int num_heads = 0;
  int hidden_dim = 0;

  bool operator==(const ModelMeta&) const = default;
};

struct Token {
  std::string text;
  int char_start = 0;  // scalar offsets into prompt_text
  int char_end = 0;

  bool operator==(const Token&) const = default;
};

// Dense [L, H, T, T] post-softmax attention; row j holds query j. Bundles
// carry float32; metrics accept either precision.
template <typename Scalar>
class BasicAttention {
 public:
  using value_type = Scalar;

  BasicAttention() = default;
  BasicAttention(int layers, int heads, int tokens)
      : layers_(layers), heads_(heads), tokens_(tokens),
        data_(static_cast<std::size_t>(layers) * heads * tokens * tokens, Scalar(0)) {}

  int layers() const { return layers_; }
  int heads() const { return heads_; }
  int tokens() const { return tokens_; }

  Scalar& at(int l, int h, int j, int k) { return data_[index(l, h, j, k)]; }
  Scalar at(int l, int h, int j, int k) const { return data_[index(l, h, j, k)]; }

  // Contiguous T x T block for one (layer, head).
  const Scalar* head(int l, int h) const { return data_.data() + index(l, h, 0, 0); }
  Scalar* head(int l, int h) { return data_.data() + index(l, h, 0, 0); }

  std::vector<Scalar>& values() { return data_; }
  const std::vector<Scalar>& values() const { return data_; }

  bool operator==(const BasicAttention&) const = default;

 private:
  std::size_t index(int l, int h, int j, int k) const {
    return ((static_cast<std::size_t>(l) * heads_ + h) * tokens_ + j) * tokens_ + k;
  }

  int layers_ = 0;
  int heads_ = 0;
  int tokens_ = 0;
  std::vector<Scalar> data_;
};

using Attention = BasicAttention<float>;
using AttentionF64 = BasicAttention<double>;

// [L + 1, D] hidden vectors for one anchor; row 0 is the embedding output.
struct HiddenStates {
  int rows = 0;
  int dim = 0;
  std::vector<float> data;

  const float* row(int l) const { return data.data() + static_cast<std::size_t>(l) * dim; }
  bool operator==(const HiddenStates&) const = default;
};

struct TraceBundle {
  std::string sample_key;
  Language language = Language::kEn;
  Order order = Order::kForward;
  ModelMeta model;
  std::string prompt_text;
  // Where the chain statement and the question start inside prompt_text.
  int statement_offset = 0;
  int question_offset = 0;
  std::vector<Token> tokens;
  Attention attention;
  std::map<std::string, HiddenStates> hidden;
  std::map<std::string, int> anchor_positions;
  std::string generated_answer;

  Condition condition() const { return {language, order}; }
  int num_tokens() const { return static_cast<int>(tokens.size()); }
  bool operator==(const TraceBundle&) const = default;
};

inline std::string hidden_blob_name(std::string_view anchor_name) {
  if (anchor_name == anchor::kFinalChainToken) return "hidden_final_chain.bin";
  if (anchor_name == anchor::kFinalPromptToken) return "hidden_last.bin";
  return "hidden_" + std::string(anchor_name) + ".bin";
}

// ---------------------------------------------------------------------------
// Invariants

inline Findings check_trace(const TraceBundle& b) {
  Findings findings;
  const int T = b.num_tokens();
  const auto& A = b.attention;
  const auto& m = b.model;

  if (A.layers() != m.num_layers || A.heads() != m.num_heads || A.tokens() != T) {
    findings.push_back({ErrorCode::kShapeMismatch, "attention",
                        "attention shape [" + std::to_string(A.layers()) + "," +
                            std::to_string(A.heads()) + "," + std::to_string(A.tokens()) +
                            "] disagrees with L=" + std::to_string(m.num_layers) +
                            " H=" + std::to_string(m.num_heads) + " T=" + std::to_string(T)});
    return findings;
  }

  for (int l = 0; l < A.layers(); ++l) {
    for (int h = 0; h < A.heads(); ++h) {
      const float* M = A.head(l, h);
      int bad_rows = 0, masked = 0, nonfinite = 0;
      int first_bad = -1, first_masked = -1;
      for (int j = 0; j < T; ++j) {
        double sum = 0.0;
        for (int k = 0; k < T; ++k) {
          const float v = M[static_cast<std::size_t>(j) * T + k];
          if (!std::isfinite(v)) {
            ++nonfinite;
            continue;
          }
          if (k > j && v != 0.0f) {
            if (first_masked < 0) first_masked = j;
            ++masked;
          }
          sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
          if (first_bad < 0) first_bad = j;
          ++bad_rows;
        }
      }
      const std::string loc = "attention[l=" + std::to_string(l) + ",h=" + std::to_string(h) + "]";
      if (nonfinite) {
        findings.push_back({ErrorCode::kNonFinite, loc,
                            std::to_string(nonfinite) + " non-finite entries"});
      }
      if (masked) {
        findings.push_back({ErrorCode::kCausalMask, loc,
                            std::to_string(masked) + " nonzero entries above the diagonal (first row " +
                                std::to_string(first_masked) + ")"});
      }
      if (bad_rows) {
        findings.push_back({ErrorCode::kRowNormalization, loc,
                            std::to_string(bad_rows) + " rows do not sum to 1 (first row " +
                                std::to_string(first_bad) + ")"});
      }
    }
  }

  const int prompt_len = static_cast<int>(unicode::length(b.prompt_text));
  int prev_start = 0;
  for (int t = 0; t < T; ++t) {
    const auto& tok = b.tokens[t];
    if (tok.char_start < 0 || tok.char_end < tok.char_start || tok.char_end > prompt_len ||
        tok.char_start < prev_start) {
      findings.push_back({ErrorCode::kOffsetRange, "tokens[" + std::to_string(t) + "]",
                          "offsets [" + std::to_string(tok.char_start) + "," +
                              std::to_string(tok.char_end) + ") invalid for prompt of length " +
                              std::to_string(prompt_len)});
    }
    prev_start = std::max(prev_start, tok.char_start);
  }
  for (int off : {b.statement_offset, b.question_offset}) {
    if (off < 0 || off > prompt_len) {
      findings.push_back({ErrorCode::kOffsetRange, "segments",
                          "segment offset " + std::to_string(off) + " outside prompt"});
    }
  }

  for (const auto& [name, idx] : b.anchor_positions) {
    if (idx < 0 || idx >= T) {
      findings.push_back({ErrorCode::kAnchorOutOfRange, "anchors." + name,
                          "anchor index " + std::to_string(idx) + " not below T=" +
                              std::to_string(T)});
    }
    auto it = b.hidden.find(name);
    if (it == b.hidden.end()) {
      findings.push_back({ErrorCode::kMissingBlob, "hidden." + name,
                          "no hidden states for declared anchor"});
    } else if (it->second.rows != m.num_layers + 1 || it->second.dim != m.hidden_dim ||
               it->second.data.size() !=
                   static_cast<std::size_t>(it->second.rows) * it->second.dim) {
      findings.push_back({ErrorCode::kShapeMismatch, "hidden." + name,
                          "hidden states must be [L+1, D]"});
    }
  }
  return findings;
}

// ---------------------------------------------------------------------------
// Blob I/O

namespace detail {

inline std::uint32_t crc32(const void* data, std::size_t size) {
  boost::crc_32_type crc;
  crc.process_bytes(data, size);
  return crc.checksum();
}

inline std::vector<char> to_le_bytes(const std::vector<float>& values) {
  std::vector<char> bytes(values.size() * sizeof(float));
  std::memcpy(bytes.data(), values.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
      std::swap(bytes[i], bytes[i + 3]);
      std::swap(bytes[i + 1], bytes[i + 2]);
    }
  }
  return bytes;
}

inline std::vector<float> from_le_bytes(std::vector<char> bytes) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i + 3 < bytes.size(); i += 4) {
      std::swap(bytes[i], bytes[i + 3]);
      std::swap(bytes[i + 1], bytes[i + 2]);
    }
  }
  std::vector<float> values(bytes.size() / sizeof(float));
  std::memcpy(values.data(), bytes.data(), values.size() * sizeof(float));
  return values;
}

inline nlohmann::ordered_json write_blob(const std::filesystem::path& dir, const std::string& file,
                                         const std::vector<float>& values,
                                         const std::vector<std::int64_t>& shape) {
  const auto bytes = to_le_bytes(values);
  std::ofstream out(dir / file, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write blob '" + (dir / file).string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write on '" + (dir / file).string() + "'");
  nlohmann::ordered_json j;
  j["file"] = file;
  j["dtype"] = "float32";
  j["shape"] = shape;
  j["crc32"] = crc32(bytes.data(), bytes.size());
  return j;
}

// Reads and verifies one blob; returns nullopt and records a finding on any
// failure.
inline std::optional<std::vector<float>> read_blob(const std::filesystem::path& dir,
                                                   const nlohmann::json& spec,
                                                   const std::string& name, Findings& findings) {
  const std::string loc = "blobs." + name;
  if (!spec.is_object() || !spec.contains("file") || !spec["file"].is_string() ||
      !spec.contains("shape") || !spec["shape"].is_array()) {
    findings.push_back({ErrorCode::kParse, loc, "blob entry needs 'file' and 'shape'"});
    return std::nullopt;
  }
  if (spec.value("dtype", "") != "float32") {
    findings.push_back({ErrorCode::kShapeMismatch, loc,
                        "unsupported dtype '" + spec.value("dtype", "") + "'"});
    return std::nullopt;
  }
  std::size_t count = 1;
  for (const auto& d : spec["shape"]) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 0) {
      findings.push_back({ErrorCode::kParse, loc, "shape entries must be non-negative integers"});
      return std::nullopt;
    }
    count *= d.get<std::size_t>();
  }
  const auto path = dir / spec["file"].get<std::string>();
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    findings.push_back({ErrorCode::kMissingBlob, loc, "missing file '" + path.string() + "'"});
    return std::nullopt;
  }
  const auto size = std::filesystem::file_size(path, ec);
  if (ec || size != count * sizeof(float)) {
    findings.push_back({ErrorCode::kShapeMismatch, loc,
                        "file has " + std::to_string(size) + " bytes, shape needs " +
                            std::to_string(count * sizeof(float))});
    return std::nullopt;
  }
  std::vector<char> bytes(size);
  std::ifstream in(path, std::ios::binary);
  in.read(bytes.data(), static_cast<std::streamsize>(size));
  if (!in) {
    findings.push_back({ErrorCode::kIo, loc, "read failed"});
    return std::nullopt;
  }
  if (!spec.contains("crc32") || !spec["crc32"].is_number_unsigned() ||
      spec["crc32"].get<std::uint32_t>() != crc32(bytes.data(), bytes.size())) {
    findings.push_back({ErrorCode::kChecksumMismatch, loc, "CRC-32 does not match"});
    return std::nullopt;
  }
  return from_le_bytes(std::move(bytes));
}

inline std::vector<std::int64_t> shape_of(const nlohmann::json& spec) {
  std::vector<std::int64_t> shape;
  for (const auto& d : spec["shape"]) shape.push_back(d.get<std::int64_t>());
  return shape;
}

// Best-effort load; every problem becomes a finding.
inline std::optional<TraceBundle> load_bundle(const std::filesystem::path& dir,
                                              Findings& findings) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) {
    findings.push_back({ErrorCode::kIo, manifest_path.string(), "cannot open manifest"});
    return std::nullopt;
  }
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    findings.push_back({ErrorCode::kParse, manifest_path.string(), e.what()});
    return std::nullopt;
  }

  try {
    const auto version = m.at("format_version").get<std::string>();
    if (version != kTraceFormatVersion) {
      findings.push_back({ErrorCode::kUnsupportedVersion, "format_version",
                          "unsupported trace format version '" + version + "'"});
      return std::nullopt;
    }
    TraceBundle b;
    b.sample_key = m.at("sample_key").get<std::string>();
    b.language = parse_language(m.at("language").get<std::string>());
    b.order = parse_order(m.at("order").get<std::string>());
    const auto& model = m.at("model");
    b.model = {model.at("id").get<std::string>(), model.at("num_layers").get<int>(),
               model.at("num_heads").get<int>(), model.at("hidden_dim").get<int>()};
    b.prompt_text = m.at("prompt_text").get<std::string>();
    b.statement_offset = m.at("statement_offset").get<int>();
    b.question_offset = m.at("question_offset").get<int>();
    for (const auto& t : m.at("tokens")) {
      b.tokens.push_back(
          {t.at("text").get<std::string>(), t.at("start").get<int>(), t.at("end").get<int>()});
    }
    b.generated_answer = m.value("generated_answer", "");
    for (const auto& [name, idx] : m.at("anchors").items()) {
      b.anchor_positions[name] = idx.get<int>();
    }

    const auto& blobs = m.at("blobs");
    const int L = b.model.num_layers, H = b.model.num_heads, T = b.num_tokens();
    const int D = b.model.hidden_dim;
    bool ok = true;
    if (!blobs.contains("attention")) {
      findings.push_back({ErrorCode::kMissingBlob, "blobs.attention", "no attention blob"});
      ok = false;
    } else if (auto values = read_blob(dir, blobs["attention"], "attention", findings)) {
      if (shape_of(blobs["attention"]) != std::vector<std::int64_t>{L, H, T, T}) {
        findings.push_back({ErrorCode::kShapeMismatch, "blobs.attention",
                            "declared shape is not [L, H, T, T]"});
        ok = false;
      } else {
        b.attention = Attention(L, H, T);
        b.attention.values() = std::move(*values);
      }
    } else {
      ok = false;
    }
    for (const auto& [name, _] : b.anchor_positions) {
      if (!blobs.contains("hidden." + name)) {
        findings.push_back({ErrorCode::kMissingBlob, "blobs.hidden." + name,
                            "no hidden blob for declared anchor '" + name + "'"});
        ok = false;
      }
    }
    for (const auto& [blob_name, spec] : blobs.items()) {
      if (blob_name.rfind("hidden.", 0) != 0) continue;
      const std::string name = blob_name.substr(7);
      auto values = read_blob(dir, spec, blob_name, findings);
      if (!values) {
        ok = false;
        continue;
      }
      if (shape_of(blobs[blob_name]) != std::vector<std::int64_t>{L + 1, D}) {
        findings.push_back({ErrorCode::kShapeMismatch, "blobs." + blob_name,
                            "declared shape is not [L+1, D]"});
        ok = false;
        continue;
      }
      b.hidden[name] = HiddenStates{L + 1, D, std::move(*values)};
    }
    if (!ok) return std::nullopt;
    return b;
  } catch (const nlohmann::json::exception& e) {
    findings.push_back({ErrorCode::kParse, manifest_path.string(), e.what()});
  } catch (const Error& e) {
    findings.push_back({e.code(), manifest_path.string(), e.what()});
  }
  return std::nullopt;
}

}  // namespace detail

inline void write_trace(const TraceBundle& b, const std::filesystem::path& dir) {
  const auto findings = check_trace(b);
  if (!findings.empty()) {
    const auto& f = findings.front();
    throw Error(f.code, "refusing to write invalid bundle: " + f.location + ": " + f.message);
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());

  const int L = b.model.num_layers, H = b.model.num_heads, T = b.num_tokens();
  nlohmann::ordered_json m;
  m["format_version"] = kTraceFormatVersion;
  m["sample_key"] = b.sample_key;
  m["language"] = to_string(b.language);
  m["order"] = to_string(b.order);
  m["model"] = {{"id", b.model.id},
                {"num_layers", L},
                {"num_heads", H},
                {"hidden_dim", b.model.hidden_dim}};
  m["prompt_text"] = b.prompt_text;
  m["statement_offset"] = b.statement_offset;
  m["question_offset"] = b.question_offset;
  auto tokens = nlohmann::ordered_json::array();
  for (const auto& t : b.tokens) {
    tokens.push_back({{"text", t.text}, {"start", t.char_start}, {"end", t.char_end}});
  }
  m["tokens"] = std::move(tokens);
  m["generated_answer"] = b.generated_answer;
  nlohmann::ordered_json anchors = nlohmann::ordered_json::object();
  for (const auto& [name, idx] : b.anchor_positions) anchors[name] = idx;
  m["anchors"] = std::move(anchors);

  nlohmann::ordered_json blobs;
  blobs["attention"] = detail::write_blob(dir, "attention.bin", b.attention.values(), {L, H, T, T});
  for (const auto& [name, states] : b.hidden) {
    blobs["hidden." + name] =
        detail::write_blob(dir, hidden_blob_name(name), states.data, {states.rows, states.dim});
  }
  m["blobs"] = std::move(blobs);

  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest in '" + dir.string() + "'");
  out << m.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "short write on manifest in '" + dir.string() + "'");
}

inline TraceBundle read_trace(const std::filesystem::path& dir) {
  Findings findings;
  auto bundle = detail::load_bundle(dir, findings);
  if (bundle) {
    auto more = check_trace(*bundle);
    findings.insert(findings.end(), more.begin(), more.end());
  }
  if (!findings.empty()) {
    const auto& f = findings.front();
    throw Error(f.code, dir.string() + ": " + f.location + ": " + f.message);
  }
  return std::move(*bundle);
}

// Never throws on malformed input; an empty result means the bundle is valid.
inline Findings validate_trace(const std::filesystem::path& dir) {
  Findings findings;
  try {
    auto bundle = detail::load_bundle(dir, findings);
    if (bundle) {
      auto more = check_trace(*bundle);
      findings.insert(findings.end(), more.begin(), more.end());
    }
  } catch (const std::exception& e) {
    findings.push_back({ErrorCode::kIo, dir.string(), e.what()});
  }
  return findings;
}

// Bundles are stored as <root>/<condition>/<sample_key>/.
inline std::filesystem::path bundle_dir(const std::filesystem::path& root, const Condition& c,
                                        const std::string& key) {
  return root / c.name() / key;
}

}  // namespace causelens
