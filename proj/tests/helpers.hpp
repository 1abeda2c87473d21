#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "causelens/causelens.hpp"
#include "oracles.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("causelens-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

inline causelens::CausalTriple toaster() {
  causelens::CausalTriple t;
  t.domain = "household_routine";
  t.key = "toaster";
  t.en = {{{"toaster", "heats"}, {"bread", "toasts"}, {"aroma", "spreads"}}};
  t.zh = {{{"面包机", "加热"}, {"面包", "烤熟"}, {"香气", "扩散"}}};
  return t;
}

inline causelens::Attention to_attention(const oracle::Tensor4& A) {
  const int L = static_cast<int>(A.size()), H = static_cast<int>(A[0].size());
  const int T = static_cast<int>(A[0][0].size());
  causelens::Attention out(L, H, T);
  for (int l = 0; l < L; ++l)
    for (int h = 0; h < H; ++h)
      for (int j = 0; j < T; ++j)
        for (int k = 0; k < T; ++k) out.at(l, h, j, k) = static_cast<float>(A[l][h][j][k]);
  return out;
}

// Uniform causal attention in double precision: row j spreads 1/(j+1) over
// tokens 0..j.
inline causelens::AttentionF64 uniform_causal(int L, int H, int T) {
  causelens::AttentionF64 a(L, H, T);
  for (int l = 0; l < L; ++l)
    for (int h = 0; h < H; ++h)
      for (int j = 0; j < T; ++j)
        for (int k = 0; k <= j; ++k) a.at(l, h, j, k) = 1.0 / static_cast<double>(j + 1);
  return a;
}

// Small synthetic model so that tests stay fast.
inline causelens::SynthOptions small_synth(int layers = 24, int heads = 2, int dim = 16) {
  causelens::SynthOptions o;
  o.model = {"synthetic-test", layers, heads, dim};
  return o;
}

inline fs::path lexicon_path() { return CAUSELENS_DEFAULT_LEXICON; }

// Writes synthetic bundles for the first `per_domain` triples of every
// domain under `root`, for all four conditions.
inline void write_synthetic_traces(const fs::path& root, int per_domain, int layers = 24,
                                   int heads = 2, int dim = 16) {
  causelens::RunConfig cfg;
  cfg.traces = root;
  cfg.jobs = 1;
  causelens::SynthRequest req;
  req.options = small_synth(layers, heads, dim);
  req.per_domain = per_domain;
  causelens::run_synth(cfg, req);
}

// Replaces the first occurrence of `from` in a file.
inline void replace_in_file(const fs::path& p, const std::string& from, const std::string& to) {
  auto s = slurp(p);
  const auto pos = s.find(from);
  if (pos == std::string::npos) throw std::runtime_error("pattern not found in " + p.string());
  s.replace(pos, from.size(), to);
  spit(p, s);
}

}  // namespace testutil
