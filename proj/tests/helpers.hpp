#pragma once

// Random inputs and brute-force reference computations shared by the tests.
// Oracles here deliberately avoid the library's own code paths.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "acm/covariance.hpp"
#include "acm/spd.hpp"

namespace testing {

inline Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

// Random rotation times log-uniform spectrum in [e^-spread, e^spread].
inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double spread = 1.5) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rng, n, n));
  const Eigen::MatrixXd q = qr.householderQ();
  std::uniform_real_distribution<double> u(-spread, spread);
  Eigen::VectorXd ev(n);
  for (Eigen::Index i = 0; i < n; ++i) ev(i) = std::exp(u(rng));
  Eigen::MatrixXd p = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (p + p.transpose());
}

inline Eigen::MatrixXd random_invertible(std::mt19937_64& rng, Eigen::Index n) {
  Eigen::MatrixXd w = gaussian(rng, n, n);
  w.diagonal().array() += 3.0;
  return w;
}

// sqrt(sum log^2 lambda_i) with lambda_i the (real) eigenvalues of P1^{-1} P2,
// computed by a general non-symmetric eigensolver.
inline double distance_oracle(const Eigen::MatrixXd& p1, const Eigen::MatrixXd& p2) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(p1.inverse() * p2);
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = std::log(es.eigenvalues()(i).real());
    s += l * l;
  }
  return std::sqrt(s);
}

// Matrix function through a full (non-symmetric) eigendecomposition.
template <typename F>
Eigen::MatrixXd general_fn(const Eigen::MatrixXd& m, F f) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::MatrixXcd v = es.eigenvectors();
  Eigen::VectorXcd d = es.eigenvalues();
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = f(d(i));
  return (v * d.asDiagonal() * v.inverse()).real();
}

inline Eigen::MatrixXd sqrtm(const Eigen::MatrixXd& m) {
  return general_fn(m, [](std::complex<double> z) { return std::sqrt(z); });
}

// Geodesic midpoint P1^{1/2} (P1^{-1/2} P2 P1^{-1/2})^{1/2} P1^{1/2}.
inline Eigen::MatrixXd two_matrix_mean(const Eigen::MatrixXd& p1, const Eigen::MatrixXd& p2) {
  const Eigen::MatrixXd h = sqrtm(p1);
  const Eigen::MatrixXd hi = h.inverse();
  return h * sqrtm(hi * p2 * hi) * h;
}

inline acm::Epoch random_epoch(std::mt19937_64& rng, Eigen::Index d, Eigen::Index t,
                               double rate = 250.0) {
  return acm::Epoch{gaussian(rng, d, t), rate};
}

// Lagged-block assembly of the augmented covariance: block (k, l) is the
// cross-covariance of the copies starting at k tau and l tau over the common
// support, scaled by 1/(m-1).
inline Eigen::MatrixXd block_assembly(const Eigen::MatrixXd& x, int p, int tau) {
  const Eigen::Index d = x.rows();
  const Eigen::Index m = x.cols() - static_cast<Eigen::Index>(p - 1) * tau;
  Eigen::MatrixXd out(d * p, d * p);
  for (int k = 0; k < p; ++k) {
    for (int l = 0; l < p; ++l) {
      const Eigen::Index ok = static_cast<Eigen::Index>(k) * tau;
      const Eigen::Index ol = static_cast<Eigen::Index>(l) * tau;
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(d, d);
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index a = 0; a < d; ++a)
          for (Eigen::Index b = 0; b < d; ++b) block(a, b) += x(a, j + ok) * x(b, j + ol);
      out.block(k * d, l * d, d, d) = block / static_cast<double>(m - 1);
    }
  }
  return out;
}

// Ledoit-Wolf intensity written out sample by sample:
// lambda = min(b2bar, d2) / d2 with S = (1/m) sum y y^T, mu = tr(S)/n,
// d2 = |S - mu I|^2 / n, b2bar = (1/m^2) sum |y y^T - S|^2 / n.
inline double ledoit_wolf_lambda_oracle(const Eigen::MatrixXd& y) {
  const Eigen::Index n = y.rows(), m = y.cols();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < m; ++k) s += y.col(k) * y.col(k).transpose();
  s /= static_cast<double>(m);
  const double mu = s.trace() / static_cast<double>(n);
  const double d2 = (s - mu * Eigen::MatrixXd::Identity(n, n)).squaredNorm() / static_cast<double>(n);
  double b2 = 0.0;
  for (Eigen::Index k = 0; k < m; ++k)
    b2 += (y.col(k) * y.col(k).transpose() - s).squaredNorm() / static_cast<double>(n);
  b2 /= static_cast<double>(m) * static_cast<double>(m);
  if (d2 == 0.0) return 0.0;
  return std::min(b2, d2) / d2;
}

// Brute-force pairwise AUC: P(score_pos > score_neg) + 0.5 P(tie).
inline double auc_oracle(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace testing
