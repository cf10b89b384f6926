#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "acm/error.hpp"

namespace acm {

// Relative eigenvalue floor separating SPD from merely PSD matrices.
inline constexpr double kSpdEpsilon = 1e-10;
inline constexpr double kSymmetryTolerance = 1e-10;

// Symmetric positive-definite matrix. Construction symmetrizes the input and
// rejects it unless min eigenvalue > kSpdEpsilon * max eigenvalue.
class SpdMatrix {
 public:
  explicit SpdMatrix(const Eigen::MatrixXd& values);

  Eigen::Index dim() const noexcept { return values_.rows(); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

  static SpdMatrix identity(Eigen::Index n);

 private:
  struct Trusted {};
  SpdMatrix(Eigen::MatrixXd values, Trusted) : values_(std::move(values)) {}

  Eigen::MatrixXd values_;
};

// Symmetric (possibly indefinite) matrix living in a tangent space.
class TangentSymm {
 public:
  explicit TangentSymm(const Eigen::MatrixXd& values);

  Eigen::Index dim() const noexcept { return values_.rows(); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

 private:
  Eigen::MatrixXd values_;
};

enum class MatrixFunction { Log, Exp, Sqrt, InvSqrt };

// U f(L) U^T for the symmetric eigendecomposition M = U L U^T.
Eigen::MatrixXd symm_fn(const Eigen::MatrixXd& m, MatrixFunction f);

double affine_invariant_distance(const SpdMatrix& a, const SpdMatrix& b);

TangentSymm log_map(const SpdMatrix& reference, const SpdMatrix& point);
SpdMatrix exp_map(const SpdMatrix& reference, const TangentSymm& tangent);

// Raised by frechet_mean when max_iter is exhausted.
class FrechetNoConvergence : public Error {
 public:
  FrechetNoConvergence(const std::string& message, SpdMatrix last, double residual)
      : Error(ErrorCode::NoConvergence, message), last_(std::move(last)), residual_(residual) {}

  const SpdMatrix& last_iterate() const noexcept { return last_; }
  double residual() const noexcept { return residual_; }

 private:
  SpdMatrix last_;
  double residual_;
};

// Karcher fixed-point iteration started at the arithmetic mean. Stops once the
// Riemannian norm of the mean tangent update drops below tol; running out of
// iterations raises NoConvergence.
SpdMatrix frechet_mean(std::span<const SpdMatrix> mats, double tol = 1e-8,
                       int max_iter = 50);

}  // namespace acm
