#include <gtest/gtest.h>

#include <sys/wait.h>

#include "helpers.hpp"

using namespace causelens;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult cli(const testutil::TempDir& scratch, const std::string& args) {
  const auto o = scratch / "stdout.txt", e = scratch / "stderr.txt";
  const std::string cmd = std::string("'") + CAUSELENS_CLI + "' " + args + " >'" + o.string() +
                          "' 2>'" + e.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testutil::slurp(o);
  r.err = testutil::slurp(e);
  return r;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = testutil::slurp(e.path());
  }
  return out;
}

// Synthetic traces shared by the tests in this file.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    traces_ = new testutil::TempDir("cli-traces");
    testutil::write_synthetic_traces(traces_->path(), 2, 24, 2, 16);
  }
  static void TearDownTestSuite() {
    delete traces_;
    traces_ = nullptr;
  }
  static std::string traces() { return traces_->path().string(); }

  testutil::TempDir scratch_{"cli"};

 private:
  static inline testutil::TempDir* traces_ = nullptr;
};

}  // namespace

TEST_F(CliTest, GenerateWritesFullDataset) {
  const auto out = scratch_ / "gen";
  const auto r = cli(scratch_, "generate --out '" + out.string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto data = testutil::slurp(out / "dataset.jsonl");
  EXPECT_EQ(std::count(data.begin(), data.end(), '\n'), 1600);
  const auto summary = nlohmann::json::parse(testutil::slurp(out / "dataset_summary.json"));
  EXPECT_EQ(summary["samples"], 1600);
  EXPECT_EQ(summary["cross_alignment"]["mismatches"], 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["subcommand"], "generate");
}

TEST_F(CliTest, SvccaMatrixIsSymmetricWithUnitDiagonal) {
  const auto out = scratch_ / "sv";
  const auto r = cli(scratch_, "svcca --traces '" + traces() + "' --out '" + out.string() +
                                   "' --conditions en-fwd,zh-fwd,en-rev,zh-rev");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(testutil::slurp(out / "svcca/matrix.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "condition,en-fwd,zh-fwd,en-rev,zh-rev");
  std::vector<std::vector<double>> m;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    m.push_back(row);
  }
  ASSERT_EQ(m.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    ASSERT_EQ(m[i].size(), 4u);
    EXPECT_NEAR(m[i][i], 1.0, 1e-8);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(m[i][j], m[j][i], 1e-8);
      EXPECT_GE(m[i][j], 0.0);
      EXPECT_LE(m[i][j], 1.0);
    }
  }
}

TEST_F(CliTest, PipelineWithoutTracesNamesExtract) {
  const auto r = cli(scratch_, "pipeline --out '" + (scratch_ / "p").string() + "'");
  EXPECT_NE(r.code, 0);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j["error"]["code"], "missing_traces");
  EXPECT_NE(j["error"]["message"].get<std::string>().find("extract"), std::string::npos);
}

TEST_F(CliTest, RerunIsByteIdenticalAndJobsDoNotMatter) {
  const auto a = scratch_ / "a", b = scratch_ / "b";
  ASSERT_EQ(cli(scratch_, "pipeline --traces '" + traces() + "' --out '" + a.string() + "' --jobs 1").code, 0);
  const auto first = tree(a);
  ASSERT_EQ(cli(scratch_, "pipeline --traces '" + traces() + "' --out '" + a.string() + "' --jobs 1").code, 0);
  EXPECT_EQ(tree(a), first);
  ASSERT_EQ(cli(scratch_, "pipeline --traces '" + traces() + "' --out '" + b.string() + "' --jobs 3").code, 0);
  auto second = tree(b);
  // report.json records the output directory; every other byte must match.
  auto ra = nlohmann::json::parse(first.at("report.json"));
  auto rb = nlohmann::json::parse(second.at("report.json"));
  ra["config"].erase("out");
  rb["config"].erase("out");
  EXPECT_EQ(ra, rb);
  auto fa = first;
  fa.erase("report.json");
  second.erase("report.json");
  EXPECT_EQ(fa, second);
}

TEST_F(CliTest, SubcommandsComposeToPipeline) {
  const auto whole = scratch_ / "whole", parts = scratch_ / "parts";
  const std::string common = " --traces '" + traces() + "' --export-ratios";
  ASSERT_EQ(cli(scratch_, "pipeline --out '" + whole.string() + "'" + common).code, 0);
  for (const char* sub : {"generate", "align", "rcar", "svcca", "reprsim", "eval", "report"}) {
    const auto r = cli(scratch_, std::string(sub) + " --out '" + parts.string() + "'" + common);
    ASSERT_EQ(r.code, 0) << sub << ": " << r.err;
  }
  auto w = tree(whole), p = tree(parts);
  EXPECT_TRUE(w.count("rcar/ratios_en-fwd.csv"));
  auto rw = nlohmann::json::parse(w.at("report.json"));
  auto rp = nlohmann::json::parse(p.at("report.json"));
  rw["config"].erase("out");
  rp["config"].erase("out");
  EXPECT_EQ(rw, rp);
  w.erase("report.json");
  p.erase("report.json");
  EXPECT_EQ(w, p);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  testutil::spit(scratch_ / "c.toml", "variance_keep = 0.5\nlanguages = [\"en\"]\n");
  const auto out = scratch_ / "cfg";
  const auto r = cli(scratch_, "svcca --config '" + (scratch_ / "c.toml").string() + "' --traces '" +
                                   traces() + "' --out '" + out.string() + "' --variance-keep 0.8");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto scores = testutil::slurp(out / "svcca/scores.csv");
  EXPECT_NE(scores.find(",0.8\n"), std::string::npos);
  EXPECT_EQ(scores.find("zh-"), std::string::npos);
}

TEST_F(CliTest, BadConfigIsAConfigError) {
  testutil::spit(scratch_ / "bad.toml", "no_such_key = 1\n");
  const auto r = cli(scratch_, "rcar --config '" + (scratch_ / "bad.toml").string() + "' --traces '" +
                                   traces() + "' --out '" + (scratch_ / "x").string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["code"], "config_error");
  const auto r2 = cli(scratch_, "rcar --traces '" + traces() + "' --out '" + (scratch_ / "x").string() +
                                    "' --variance-keep 2");
  EXPECT_EQ(r2.code, 2);
}

TEST_F(CliTest, ValidateFlagsCorruptBundles) {
  const auto ok = cli(scratch_, "validate --traces '" + traces() + "'");
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(nlohmann::json::parse(ok.out)["invalid"], 0);

  testutil::TempDir copy("cli-corrupt");
  fs::copy(traces(), copy.path(), fs::copy_options::recursive);
  const auto victim = copy.path() / "en-fwd" / "house-001" / "hidden_last.bin";
  auto bytes = testutil::slurp(victim);
  bytes[0] = static_cast<char>(bytes[0] ^ 0x40);
  testutil::spit(victim, bytes);
  const auto bad = cli(scratch_, "validate --traces '" + copy.path().string() + "'");
  EXPECT_EQ(bad.code, 1);
  EXPECT_EQ(nlohmann::json::parse(bad.out)["invalid"], 1);
}

TEST_F(CliTest, ModelFlagRejectsBundlesFromOtherModels) {
  const auto out = scratch_ / "m";
  const auto ok = cli(scratch_, "rcar --traces '" + traces() + "' --out '" + out.string() +
                                    "' --model synthetic-test");
  EXPECT_EQ(ok.code, 0) << ok.err;
  const auto bad = cli(scratch_, "rcar --traces '" + traces() + "' --out '" + out.string() +
                                     "' --model some-other-model");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(nlohmann::json::parse(bad.err)["error"]["message"].get<std::string>().find("some-other-model"),
            std::string::npos);
}

TEST_F(CliTest, HelpListsEverySubcommand) {
  const auto r = cli(scratch_, "--help");
  EXPECT_EQ(r.code, 0);
  for (const auto& s : subcommands()) EXPECT_NE(r.out.find(s), std::string::npos) << s;
}
