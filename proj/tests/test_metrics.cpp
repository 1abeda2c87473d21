#include <gtest/gtest.h>

#include <algorithm>

#include "helpers.hpp"

using namespace causelens;

TEST(AttentionRatio, MatchesNaiveOracleOnRandomTensors) {
  std::mt19937_64 rng(12345);
  std::uniform_int_distribution<int> dim(1, 4), len(2, 12);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int L = dim(rng), H = dim(rng), T = len(rng);
    const auto A = oracle::random_causal(rng, L, H, T);
    std::uniform_int_distribution<int> tok(0, T - 2), count(1, T - 1);
    std::vector<int> set;
    for (int n = count(rng); n > 0; --n) set.push_back(tok(rng));
    const auto expected = oracle::attention_ratio(A, set);
    const auto got = attention_ratio(testutil::to_attention(A), set).ratio;
    for (int l = 0; l < L; ++l)
      for (int h = 0; h < H; ++h) worst = std::max(worst, std::abs(got(l, h) - expected[l][h]));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(AttentionRatio, HandCaseUniformThreeTokens) {
  // Token 0 receives 1/2 from row 1 and 1/3 from row 2 out of mass 2.
  const auto r = attention_ratio(testutil::uniform_causal(1, 1, 3), std::vector<int>{0});
  EXPECT_NEAR(r.ratio(0, 0), 5.0 / 12.0, 1e-12);
}

TEST(AttentionRatio, PermutationAndDuplicatesDoNotMatter) {
  std::mt19937_64 rng(3);
  const auto A = testutil::to_attention(oracle::random_causal(rng, 2, 3, 9));
  const auto a = attention_ratio(A, std::vector<int>{1, 4, 6}).ratio;
  const auto b = attention_ratio(A, std::vector<int>{6, 1, 4}).ratio;
  const auto c = attention_ratio(A, std::vector<int>{4, 6, 1, 6}).ratio;
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(AttentionRatio, BoundedForSubStochasticRows) {
  std::mt19937_64 rng(4);
  auto A = oracle::random_causal(rng, 3, 3, 10);
  std::uniform_real_distribution<double> shrink(0.1, 1.0);
  for (auto& l : A)
    for (auto& h : l)
      for (auto& row : h) {
        const double f = shrink(rng);
        for (auto& v : row) v *= f;
      }
  const auto att = testutil::to_attention(A);
  for (int i = 0; i < 9; ++i) {
    const auto r = attention_ratio(att, std::vector<int>{i}).ratio;
    EXPECT_GE(r.minCoeff(), 0.0);
    EXPECT_LE(r.maxCoeff(), 1.0);
  }
}

TEST(AttentionRatio, LastTokenExcludedWithWarning) {
  const auto A = testutil::uniform_causal(1, 1, 4);
  const auto with_last = attention_ratio(A, std::vector<int>{1, 3});
  const auto without = attention_ratio(A, std::vector<int>{1});
  EXPECT_EQ(with_last.excluded, std::vector<int>{3});
  EXPECT_TRUE(has_finding(with_last.warnings, ErrorCode::kNoValidQueries));
  EXPECT_DOUBLE_EQ(with_last.ratio(0, 0), without.ratio(0, 0));
  EXPECT_TRUE(without.warnings.empty());
}

TEST(AttentionRatio, ErrorsOnEmptyOrOnlyLastToken) {
  const auto A = testutil::uniform_causal(1, 1, 4);
  try {
    attention_ratio(A, std::vector<int>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTokenSet);
  }
  try {
    attention_ratio(A, std::vector<int>{3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoValidQueries);
  }
  EXPECT_THROW(attention_ratio(A, std::vector<int>{4}), Error);
}

TEST(Rcar, IdenticalHeadsScaleLinearly) {
  std::mt19937_64 rng(5);
  auto one = oracle::random_causal(rng, 2, 1, 8);
  const int H = 16;
  oracle::Tensor4 many(2);
  for (int l = 0; l < 2; ++l) many[l].assign(H, one[l][0]);
  const std::vector<int> set{0, 2, 5};
  const auto rho = attention_ratio(testutil::to_attention(one), set).ratio;
  const auto rc = compute_rcar(testutil::to_attention(many), "k", "c", set);
  for (int l = 0; l < 2; ++l) EXPECT_EQ(rc.layer_rcar(l), H * rho(l, 0));
}

TEST(Rcar, LayerValueIsHeadSum) {
  std::mt19937_64 rng(6);
  const auto A = testutil::to_attention(oracle::random_causal(rng, 3, 4, 7));
  const auto r = compute_rcar(A, "k", "c", std::vector<int>{2, 3});
  for (int l = 0; l < 3; ++l) EXPECT_NEAR(r.layer_rcar(l), r.ratio.row(l).sum(), 1e-15);
}

TEST(Aggregate, CopiesOfOneSampleGiveItsTrajectory) {
  Eigen::VectorXd t(4);
  t << 0.1, 0.7, 0.3, 1.9;
  const auto agg = aggregate_trajectories({}, "c", std::vector<Eigen::VectorXd>(5, t));
  EXPECT_EQ(agg.count, 5u);
  EXPECT_LT((agg.mean - t).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT(agg.sd.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Aggregate, PopulationStatisticsAndMergeOrder) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(1.0, 2.0);
  std::vector<Eigen::VectorXd> samples;
  for (int i = 0; i < 23; ++i) {
    Eigen::VectorXd v(3);
    v << g(rng), g(rng), g(rng);
    samples.push_back(v);
  }
  // Two-pass reference.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3), var = Eigen::VectorXd::Zero(3);
  for (const auto& v : samples) mean += v;
  mean /= 23.0;
  for (const auto& v : samples) var += (v - mean).cwiseAbs2();
  var /= 23.0;

  const auto agg = aggregate_trajectories({}, "c", samples);
  EXPECT_LT((agg.mean - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((agg.sd - var.cwiseSqrt()).cwiseAbs().maxCoeff(), 1e-12);

  TrajectoryAccumulator a, b, c;
  for (int i = 0; i < 23; ++i) (i % 3 == 0 ? a : (i % 3 == 1 ? b : c)).add(samples[i]);
  TrajectoryAccumulator left = a;
  left.merge(b);
  left.merge(c);
  TrajectoryAccumulator right = c;
  right.merge(a);
  right.merge(b);
  EXPECT_EQ(left.count(), 23u);
  EXPECT_LT((left.mean() - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((right.sd() - var.cwiseSqrt()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Aggregate, ErrorsAndMixedComponents) {
  EXPECT_THROW(aggregate_trajectories({}, "c", {}), Error);
  RcarResult a{"k1", "x", {}, Eigen::VectorXd::Ones(2), {}};
  RcarResult b{"k2", "y", {}, Eigen::VectorXd::Ones(2), {}};
  EXPECT_THROW(aggregate_condition({}, {a, b}), Error);
  TrajectoryAccumulator acc;
  acc.add(Eigen::VectorXd::Ones(2));
  EXPECT_THROW(acc.add(Eigen::VectorXd::Ones(3)), Error);
}

TEST(ComponentDiff, SumsOverLayers) {
  AggregateSet zh, en;
  Eigen::VectorXd z(3), e(3);
  z << 1.0, 2.0, 3.0;
  e << 0.5, 0.5, 0.5;
  zh["once"] = {{Language::kZh, Order::kForward}, "once", z, Eigen::VectorXd::Zero(3), 4};
  en["once"] = {{Language::kEn, Order::kForward}, "once", e, Eigen::VectorXd::Zero(3), 4};
  const auto d = component_diff(zh, en, {"once"});
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0].value, 4.5);
  try {
    component_diff(zh, en, {"once", "then"});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kMissingComponent);
  }
}

TEST(ExactSum, CorrectlyRounded) {
  EXPECT_EQ(exact_sum(std::vector<double>{1e100, 1.0, -1e100}), 1.0);
  EXPECT_EQ(exact_sum(std::vector<double>(10, 0.1)), 1.0);
  EXPECT_EQ(exact_sum(std::vector<double>{}), 0.0);
  // Half-way case resolved to even.
  EXPECT_EQ(exact_sum(std::vector<double>{1.0, 0x1p-53, 0x1p-106}), 1.0 + 0x1p-52);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double rho = u(rng);
    for (int h = 1; h <= 64; ++h) {
      ASSERT_EQ(exact_sum(std::vector<double>(static_cast<std::size_t>(h), rho)), h * rho);
    }
  }
}

TEST(AttentionRatio, Float32AndFloat64AgreeOnRepresentableValues) {
  std::mt19937_64 rng(9);
  const auto A = testutil::to_attention(oracle::random_causal(rng, 2, 2, 7));
  causelens::AttentionF64 D(2, 2, 7);
  for (std::size_t i = 0; i < A.values().size(); ++i) D.values()[i] = A.values()[i];
  EXPECT_EQ(attention_ratio(A, std::vector<int>{0, 3}).ratio,
            attention_ratio(D, std::vector<int>{0, 3}).ratio);
}
