#pragma once

// Similarity between experimental conditions.
//
// svcca() compares two L x 3 trajectory matrices, treating layers as data
// points and the (cause, intermediate, final) columns as neurons.
// layerwise_cosine() compares anchor hidden vectors of paired samples.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causelens/chaingen.hpp"
#include "causelens/error.hpp"
#include "causelens/metrics.hpp"
#include "causelens/traceio.hpp"

namespace causelens {

inline constexpr double kDefaultVarianceKeep = 0.99;

struct TrajectoryMatrix {
  Condition condition;
  Eigen::MatrixXd values;  // [L, 3], columns (cause, intermediate, final)
};

// Aggregates must carry component ids "cause", "intermediate" and "final".
inline TrajectoryMatrix build_trajectory(const std::vector<ConditionAggregate>& aggregates) {
  std::map<Role, const ConditionAggregate*> by_role;
  for (const auto& a : aggregates) {
    Role role;
    try {
      role = parse_role(a.component_id);
    } catch (const Error&) {
      throw Error(ErrorCode::kMissingRole,
                  "aggregate '" + a.component_id + "' is not a causal role");
    }
    if (!by_role.emplace(role, &a).second) {
      throw Error(ErrorCode::kDuplicateRole, "role '" + a.component_id + "' given twice");
    }
  }
  for (auto role : kAllRoles) {
    if (!by_role.count(role)) {
      throw Error(ErrorCode::kMissingRole,
                  "no aggregate for role '" + std::string(to_string(role)) + "'");
    }
  }
  const auto& first = *by_role[Role::kCause];
  TrajectoryMatrix out{first.condition, Eigen::MatrixXd(first.mean.size(), 3)};
  int col = 0;
  for (auto role : kAllRoles) {
    const auto& a = *by_role[role];
    if (a.condition != first.condition) {
      throw Error(ErrorCode::kKeyMismatch, "aggregates from different conditions");
    }
    if (a.mean.size() != first.mean.size()) {
      throw Error(ErrorCode::kShapeMismatch, "aggregates have unequal layer counts");
    }
    out.values.col(col++) = a.mean;
  }
  return out;
}

namespace detail {

// Orthonormal basis of the centered matrix's leading singular directions,
// keeping the fewest that reach `variance_keep` of the total variance.
inline Eigen::MatrixXd svcca_basis(const Eigen::MatrixXd& m, double variance_keep,
                                   const char* which) {
  const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
  const Eigen::VectorXd s = svd.singularValues();
  const double total = s.squaredNorm();
  if (s.size() == 0 || !(total > 0.0) || s(0) <= 1e-300) {
    throw Error(ErrorCode::kUndefinedSimilarity,
                std::string(which) + " has rank 0 after centering; similarity undefined");
  }
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > s(0) * 1e-10) ++rank;
  Eigen::Index keep = 0;
  double acc = 0.0;
  while (keep < rank) {
    acc += s(keep) * s(keep);
    ++keep;
    if (acc >= variance_keep * total * (1.0 - 1e-12)) break;
  }
  return svd.matrixU().leftCols(keep);
}

}  // namespace detail

// Mean canonical correlation between the SVD-truncated representations,
// clamped to [0, 1].
inline double svcca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                    double variance_keep = kDefaultVarianceKeep) {
  if (x.rows() != y.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "svcca inputs need equal row counts (" +
                                               std::to_string(x.rows()) + " vs " +
                                               std::to_string(y.rows()) + ")");
  }
  if (!(variance_keep > 0.0 && variance_keep <= 1.0)) {
    throw Error(ErrorCode::kConfig, "variance_keep must lie in (0, 1]");
  }
  const Eigen::MatrixXd ux = detail::svcca_basis(x, variance_keep, "first input");
  const Eigen::MatrixXd uy = detail::svcca_basis(y, variance_keep, "second input");
  // Whitened cross-covariance; its singular values are the canonical
  // correlations.
  const Eigen::MatrixXd cross = ux.transpose() * uy;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
  const Eigen::VectorXd rho = svd.singularValues();
  const double score = rho.size() ? rho.mean() : 0.0;
  return std::clamp(score, 0.0, 1.0);
}

inline double svcca(const TrajectoryMatrix& x, const TrajectoryMatrix& y,
                    double variance_keep = kDefaultVarianceKeep) {
  return svcca(x.values, y.values, variance_keep);
}

// ---------------------------------------------------------------------------
// Layerwise cosine

// Hidden vectors at one anchor, [L + 1, D] per sample key.
using AnchorVectors = std::map<std::string, Eigen::MatrixXd>;
using CorrectnessMap = std::map<std::string, bool>;

inline Eigen::MatrixXd to_matrix(const HiddenStates& states) {
  Eigen::MatrixXd m(states.rows, states.dim);
  for (int r = 0; r < states.rows; ++r) {
    for (int c = 0; c < states.dim; ++c) {
      m(r, c) = states.data[static_cast<std::size_t>(r) * states.dim + c];
    }
  }
  return m;
}

inline AnchorVectors anchor_vectors(const std::vector<TraceBundle>& traces,
                                    const std::string& anchor_name) {
  AnchorVectors out;
  for (const auto& t : traces) {
    auto it = t.hidden.find(anchor_name);
    if (it == t.hidden.end()) {
      throw Error(ErrorCode::kMissingBlob,
                  t.sample_key + ": no hidden states for anchor '" + anchor_name + "'");
    }
    out[t.sample_key] = to_matrix(it->second);
  }
  return out;
}

struct CosineProfile {
  std::string pair;              // e.g. "en-fwd|zh-fwd"
  Eigen::VectorXd mean;          // [L + 1]
  std::vector<std::size_t> count;
  Findings findings;
};

inline CosineProfile layerwise_cosine(const AnchorVectors& a, const AnchorVectors& b,
                                      const CorrectnessMap& correct_a,
                                      const CorrectnessMap& correct_b,
                                      const std::string& pair_name = {}) {
  CosineProfile profile;
  profile.pair = pair_name;
  auto is_correct = [](const CorrectnessMap& m, const std::string& key) {
    auto it = m.find(key);
    return it != m.end() && it->second;
  };

  Eigen::Index layers = -1;
  Eigen::VectorXd sum;
  for (const auto& [key, ha] : a) {
    auto it = b.find(key);
    if (it == b.end()) continue;
    if (!is_correct(correct_a, key) || !is_correct(correct_b, key)) continue;
    const auto& hb = it->second;
    if (ha.rows() != hb.rows() || ha.cols() != hb.cols()) {
      throw Error(ErrorCode::kShapeMismatch, key + ": hidden state shapes differ between sides");
    }
    if (layers < 0) {
      layers = ha.rows();
      sum = Eigen::VectorXd::Zero(layers);
      profile.count.assign(static_cast<std::size_t>(layers), 0);
    } else if (ha.rows() != layers) {
      throw Error(ErrorCode::kShapeMismatch, key + ": layer count differs from other samples");
    }
    for (Eigen::Index l = 0; l < layers; ++l) {
      const double na = ha.row(l).norm();
      const double nb = hb.row(l).norm();
      if (na == 0.0 || nb == 0.0) {
        profile.findings.push_back({ErrorCode::kZeroNorm,
                                    key + "/layer " + std::to_string(l),
                                    "zero-norm hidden vector; pair skipped at this layer"});
        continue;
      }
      const double c = ha.row(l).dot(hb.row(l)) / (na * nb);
      sum(l) += std::clamp(c, -1.0, 1.0);
      ++profile.count[static_cast<std::size_t>(l)];
    }
  }
  if (layers < 0) {
    throw Error(ErrorCode::kEmptyProfile,
                "no paired samples where both sides are correct" +
                    (pair_name.empty() ? std::string() : " for " + pair_name));
  }
  profile.mean = Eigen::VectorXd::Zero(layers);
  for (Eigen::Index l = 0; l < layers; ++l) {
    const auto n = profile.count[static_cast<std::size_t>(l)];
    if (n > 0) profile.mean(l) = sum(l) / static_cast<double>(n);
  }
  return profile;
}

}  // namespace causelens
