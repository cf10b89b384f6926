#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "acm/spd.hpp"

namespace acm {

// One fixed-length multichannel window: channels x samples.
struct Epoch {
  Eigen::MatrixXd data;
  double sample_rate = 1.0;

  Eigen::Index channels() const noexcept { return data.rows(); }
  Eigen::Index samples() const noexcept { return data.cols(); }
};

// Lag-stacking parameters: `order` delayed copies spaced `lag` samples apart.
struct AugmentedParams {
  int order = 1;
  int lag = 1;

  // Samples consumed by stacking; must be < epoch length.
  long span() const noexcept { return static_cast<long>(order - 1) * lag; }
  bool valid_for(Eigen::Index samples) const noexcept {
    return order >= 1 && lag >= 1 && span() < samples;
  }
};

enum class Shrinkage { Auto, On, Off };

// Auto means on for order > 1 only.
inline bool shrinkage_enabled(Shrinkage s, const AugmentedParams& params) {
  return s == Shrinkage::On || (s == Shrinkage::Auto && params.order > 1);
}

// (1/(T-1)) X X^T without centering; the input is expected band-passed.
SpdMatrix sample_covariance(const Epoch& x);

// Stacks `order` delayed copies of the channels. Column j ends at time
// t = j + (order-1)*lag and row block k holds x[t - (order-1-k)*lag], i.e.
// X[:, j + k*lag], so block 0 is the most delayed copy.
Epoch embed_epoch(const Epoch& x, const AugmentedParams& params);

SpdMatrix augmented_covariance(const Epoch& x, const AugmentedParams& params, bool shrink);

struct ShrunkCovariance {
  SpdMatrix covariance;
  double lambda;
};

// Ledoit-Wolf shrinkage toward (tr C / n) I. `data` is the n x m matrix the
// covariance was estimated from, with covariance == data data^T / (m - 1).
ShrunkCovariance ledoit_wolf(const Eigen::MatrixXd& covariance, const Eigen::MatrixXd& data);

struct YuleWalkerSolution {
  std::vector<Eigen::MatrixXd> coefficients;  // A_1..A_p
  Eigen::MatrixXd innovation;                 // U
};

// gammas[k] = Gamma(k) = E[X_t X_{t-k}^T] for k = 0..p. Solves the block
// Toeplitz system for A_1..A_p and the lag-0 line for U.
YuleWalkerSolution yule_walker_solve(std::span<const Eigen::MatrixXd> gammas, int order);

// Biased estimate (1/T) sum_{t>=lag} X_t X_{t-lag}^T, uncentered like
// sample_covariance. The 1/T scaling keeps the block Toeplitz system positive
// definite.
Eigen::MatrixXd lagged_covariance(const Epoch& x, int lag);

}  // namespace acm
