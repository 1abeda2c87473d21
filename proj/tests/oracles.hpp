#pragma once

// Reference implementations used only by tests. They follow the textbook
// definitions directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Dense [L][H][T][T] attention as nested vectors.
using Tensor4 = std::vector<std::vector<std::vector<std::vector<double>>>>;

// Attention ratio straight from the definition: quadruple loop over
// (layer, head, token in set, query), denominators recomputed every time.
// Tokens without any later query are dropped.
inline std::vector<std::vector<double>> attention_ratio(const Tensor4& A,
                                                        const std::vector<int>& tokens) {
  const std::size_t L = A.size(), H = A[0].size(), T = A[0][0].size();
  const std::set<int> unique(tokens.begin(), tokens.end());
  std::vector<std::vector<double>> r(L, std::vector<double>(H, 0.0));
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t h = 0; h < H; ++h) {
      double total = 0.0;
      int used = 0;
      for (int i : unique) {
        if (static_cast<std::size_t>(i) + 1 >= T) continue;
        double num = 0.0, den = 0.0;
        for (std::size_t j = static_cast<std::size_t>(i) + 1; j < T; ++j) {
          num += A[l][h][j][static_cast<std::size_t>(i)];
          for (std::size_t k = 0; k < T; ++k) den += A[l][h][j][k];
        }
        total += den > 0.0 ? num / den : 0.0;
        ++used;
      }
      r[l][h] = used ? total / used : 0.0;
    }
  }
  return r;
}

inline Tensor4 random_causal(std::mt19937_64& rng, int L, int H, int T) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor4 A(L, std::vector<std::vector<std::vector<double>>>(
                   H, std::vector<std::vector<double>>(T, std::vector<double>(T, 0.0))));
  for (auto& layer : A) {
    for (auto& head : layer) {
      for (int j = 0; j < T; ++j) {
        double z = 0.0;
        for (int k = 0; k <= j; ++k) z += (head[j][k] = u(rng) + 1e-3);
        for (int k = 0; k <= j; ++k) {
          // Round through float first so oracle and library see the same values.
          head[j][k] = static_cast<double>(static_cast<float>(head[j][k] / z));
        }
      }
    }
  }
  return A;
}

// Canonical correlation analysis through the covariance eigen-system:
// 1. center; 2. eigendecompose each covariance and keep the leading
//    directions reaching `keep` of the variance; 3. in the reduced
//    coordinates, canonical correlations are the square roots of the
//    eigenvalues of Sxx^-1/2 Sxy Syy^-1 Syx Sxx^-1/2.
inline double cca_mean(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double keep) {
  auto reduce = [keep](const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    // Ascending eigenvalues; walk from the top.
    const Eigen::VectorXd ev = es.eigenvalues();
    const double total = ev.cwiseMax(0.0).sum();
    const Eigen::Index p = ev.size();
    double acc = 0.0;
    Eigen::Index k = 0;
    while (k < p) {
      const double lam = std::max(0.0, ev(p - 1 - k));
      if (lam <= total * 1e-20) break;
      acc += lam;
      ++k;
      if (acc >= keep * total * (1.0 - 1e-12)) break;
    }
    return Eigen::MatrixXd(c * es.eigenvectors().rightCols(k));
  };
  const Eigen::MatrixXd a = reduce(x), b = reduce(y);
  const Eigen::MatrixXd saa = a.transpose() * a, sbb = b.transpose() * b, sab = a.transpose() * b;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(saa);
  const Eigen::MatrixXd saa_inv_sqrt = ea.operatorInverseSqrt();
  const Eigen::MatrixXd m = saa_inv_sqrt * sab * sbb.inverse() * sab.transpose() * saa_inv_sqrt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (m + m.transpose()));
  const Eigen::VectorXd rho2 = em.eigenvalues();
  const Eigen::Index n = std::min(a.cols(), b.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    sum += std::sqrt(std::clamp(rho2(rho2.size() - 1 - i), 0.0, 1.0));
  }
  return std::clamp(sum / static_cast<double>(n), 0.0, 1.0);
}

inline Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  }
  return m;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

}  // namespace oracle
