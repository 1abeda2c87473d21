#pragma once

// Component attention metrics.
//
// For a component with token set S and one (layer, head) attention matrix A,
// the attention ratio is the mean over i in S of
//
//     sum_{j>i} A[j][i]  /  sum_{j>i} sum_k A[j][k]
//
// i.e. the share of attention that later (valid) queries send to token i.
// The layer RCAR sums these ratios over heads.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causelens/chaingen.hpp"
#include "causelens/error.hpp"
#include "causelens/traceio.hpp"

namespace causelens {

struct RatioResult {
  Eigen::MatrixXd ratio;      // [L, H]
  std::vector<int> excluded;  // tokens dropped for having no valid query
  Findings warnings;
};

// The denominator is evaluated literally, so sub-stochastic rows still give
// well-defined values. A token whose valid queries carry no mass at all
// contributes 0.
template <typename Scalar>
RatioResult attention_ratio(const BasicAttention<Scalar>& attention, std::span<const int> token_set) {
  const int L = attention.layers(), H = attention.heads(), T = attention.tokens();
  if (token_set.empty()) throw Error(ErrorCode::kEmptyTokenSet, "component token set is empty");

  std::vector<int> tokens(token_set.begin(), token_set.end());
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());

  RatioResult result;
  std::vector<int> used;
  for (int i : tokens) {
    if (i < 0 || i >= T) {
      throw Error(ErrorCode::kOffsetRange,
                  "token index " + std::to_string(i) + " outside [0," + std::to_string(T) + ")");
    }
    if (i == T - 1) {
      result.excluded.push_back(i);
      result.warnings.push_back({ErrorCode::kNoValidQueries, "token " + std::to_string(i),
                                 "last token has no valid queries; excluded"});
    } else {
      used.push_back(i);
    }
  }
  if (used.empty()) {
    throw Error(ErrorCode::kNoValidQueries, "no token in the set has a valid query");
  }

  result.ratio = Eigen::MatrixXd::Zero(L, H);
  std::vector<double> denom(static_cast<std::size_t>(T) + 1);
  for (int l = 0; l < L; ++l) {
    for (int h = 0; h < H; ++h) {
      const Scalar* M = attention.head(l, h);
      // denom[i] = sum of row masses over queries j > i
      denom[T] = 0.0;
      denom[T - 1] = 0.0;
      for (int j = T - 1; j >= 1; --j) {
        double row = 0.0;
        const Scalar* r = M + static_cast<std::size_t>(j) * T;
        for (int k = 0; k < T; ++k) row += r[k];
        denom[j - 1] = denom[j] + row;
      }
      double acc = 0.0;
      for (int i : used) {
        double num = 0.0;
        for (int j = i + 1; j < T; ++j) num += M[static_cast<std::size_t>(j) * T + i];
        if (denom[i] > 0.0) acc += num / denom[i];
      }
      result.ratio(l, h) = acc / static_cast<double>(used.size());
    }
  }
  return result;
}

// Correctly rounded sum of finite doubles (Shewchuk partials, as in
// Python's math.fsum). The layer value then does not depend on head order,
// and H copies of one ratio sum to exactly H * ratio.
inline double exact_sum(std::span<const double> xs) {
  std::vector<double> partials;
  for (double x : xs) {
    std::size_t i = 0;
    for (double y : partials) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[i++] = lo;
      x = hi;
    }
    partials.resize(i);
    partials.push_back(x);
  }
  if (partials.empty()) return 0.0;
  std::size_t n = partials.size() - 1;
  double hi = partials[n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials[--n];
    hi = x + y;
    lo = y - (hi - x);
    if (lo != 0.0) break;
  }
  // Round half to even across the remaining partials.
  if (n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) hi = x;
  }
  return hi;
}

inline Eigen::VectorXd rcar_by_layer(const Eigen::MatrixXd& ratio) {
  Eigen::VectorXd out(ratio.rows());
  std::vector<double> row(static_cast<std::size_t>(ratio.cols()));
  for (Eigen::Index l = 0; l < ratio.rows(); ++l) {
    for (Eigen::Index h = 0; h < ratio.cols(); ++h) row[static_cast<std::size_t>(h)] = ratio(l, h);
    out(l) = exact_sum(row);
  }
  return out;
}

struct RcarResult {
  std::string sample_key;
  std::string component_id;
  Eigen::MatrixXd ratio;       // [L, H]
  Eigen::VectorXd layer_rcar;  // [L]
  Findings warnings;
};

template <typename Scalar>
RcarResult compute_rcar(const BasicAttention<Scalar>& attention, const std::string& sample_key,
                               const std::string& component_id, std::span<const int> tokens) {
  auto r = attention_ratio(attention, tokens);
  RcarResult out{sample_key, component_id, std::move(r.ratio), {}, std::move(r.warnings)};
  out.layer_rcar = rcar_by_layer(out.ratio);
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

// Running mean and sum of squared deviations (Chan et al. merge), so partial
// accumulators over disjoint sample subsets combine in any order.
class TrajectoryAccumulator {
 public:
  void add(const Eigen::VectorXd& x) {
    if (count_ == 0) {
      mean_ = Eigen::VectorXd::Zero(x.size());
      m2_ = Eigen::VectorXd::Zero(x.size());
    } else if (x.size() != mean_.size()) {
      throw Error(ErrorCode::kShapeMismatch, "trajectory length " + std::to_string(x.size()) +
                                                 " differs from " + std::to_string(mean_.size()));
    }
    ++count_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.cwiseProduct(x - mean_);
  }

  void merge(const TrajectoryAccumulator& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    if (other.mean_.size() != mean_.size()) {
      throw Error(ErrorCode::kShapeMismatch, "cannot merge trajectories of different length");
    }
    const double n = static_cast<double>(count_ + other.count_);
    const Eigen::VectorXd delta = other.mean_ - mean_;
    mean_ += delta * (static_cast<double>(other.count_) / n);
    m2_ += other.m2_ + delta.cwiseProduct(delta) *
                           (static_cast<double>(count_) * static_cast<double>(other.count_) / n);
    count_ += other.count_;
  }

  std::size_t count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  // Population standard deviation.
  Eigen::VectorXd sd() const {
    if (count_ == 0) return {};
    return (m2_ / static_cast<double>(count_)).cwiseMax(0.0).cwiseSqrt();
  }

 private:
  std::size_t count_ = 0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd m2_;
};

struct ConditionAggregate {
  Condition condition;
  std::string component_id;
  Eigen::VectorXd mean;  // [L]
  Eigen::VectorXd sd;    // [L]
  std::size_t count = 0;
};

inline ConditionAggregate aggregate_trajectories(const Condition& condition,
                                                 const std::string& component_id,
                                                 const std::vector<Eigen::VectorXd>& trajectories) {
  if (trajectories.empty()) {
    throw Error(ErrorCode::kEmptyInput,
                "no samples to aggregate for " + condition.name() + "/" + component_id);
  }
  TrajectoryAccumulator acc;
  for (const auto& t : trajectories) acc.add(t);
  return {condition, component_id, acc.mean(), acc.sd(), acc.count()};
}

inline ConditionAggregate aggregate_condition(const Condition& condition,
                                              const std::vector<RcarResult>& results) {
  if (results.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no samples to aggregate for " + condition.name());
  }
  std::vector<Eigen::VectorXd> trajectories;
  trajectories.reserve(results.size());
  for (const auto& r : results) {
    if (r.component_id != results.front().component_id) {
      throw Error(ErrorCode::kMissingComponent, "mixed components in one aggregate: '" +
                                                    r.component_id + "' vs '" +
                                                    results.front().component_id + "'");
    }
    trajectories.push_back(r.layer_rcar);
  }
  return aggregate_trajectories(condition, results.front().component_id, trajectories);
}

// Aggregates of one condition keyed by component id.
using AggregateSet = std::map<std::string, ConditionAggregate>;

struct ComponentDiff {
  std::string component_id;
  double value = 0.0;
};

// Per component: sum over layers of the zh mean minus that of the en mean.
inline std::vector<ComponentDiff> component_diff(const AggregateSet& zh, const AggregateSet& en,
                                                 const std::vector<std::string>& component_ids) {
  std::vector<ComponentDiff> out;
  out.reserve(component_ids.size());
  for (const auto& id : component_ids) {
    auto z = zh.find(id);
    auto e = en.find(id);
    if (z == zh.end() || e == en.end()) {
      throw Error(ErrorCode::kMissingComponent,
                  "component '" + id + "' missing from " + (z == zh.end() ? "zh" : "en") +
                      " aggregates");
    }
    if (z->second.mean.size() != e->second.mean.size()) {
      throw Error(ErrorCode::kShapeMismatch, "component '" + id + "' has unequal layer counts");
    }
    out.push_back({id, z->second.mean.sum() - e->second.mean.sum()});
  }
  return out;
}

}  // namespace causelens
