#include "acm/spd.hpp"

#include <cmath>
#include <sstream>

#include "acm/error.hpp"

namespace acm {
namespace {

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

void require_square(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows()
       << "x" << m.cols();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
  if (!m.allFinite()) fail(ErrorCode::InvalidArgument, std::string(what) + ": non-finite entry");
}

void require_symmetric(const Eigen::MatrixXd& m, const char* what) {
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    std::ostringstream os;
    os << what << ": matrix is not symmetric (max |M - M^T| = " << asym << ")";
    fail(ErrorCode::NotSymmetric, os.str());
  }
}

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension mismatch " << a << " vs " << b;
    fail(ErrorCode::DimensionMismatch, os.str());
  }
}

// symm_fn without the validation pass, for inputs that are symmetric by
// construction.
Eigen::MatrixXd apply_fn(const Eigen::MatrixXd& m, MatrixFunction f) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) fail(ErrorCode::NoConvergence, "symmetric eigensolver failed");
  Eigen::VectorXd ev = es.eigenvalues();
  if (f != MatrixFunction::Exp) {
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (!(ev(i) > 0.0)) {
        std::ostringstream os;
        os << "eigenvalue " << ev(i) << " (index " << i << ") is not positive";
        fail(ErrorCode::NonPositiveEigenvalue, os.str());
      }
    }
  }
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    switch (f) {
      case MatrixFunction::Log: ev(i) = std::log(ev(i)); break;
      case MatrixFunction::Exp: ev(i) = std::exp(ev(i)); break;
      case MatrixFunction::Sqrt: ev(i) = std::sqrt(ev(i)); break;
      case MatrixFunction::InvSqrt: ev(i) = 1.0 / std::sqrt(ev(i)); break;
    }
  }
  const Eigen::MatrixXd& u = es.eigenvectors();
  return symmetrized(u * ev.asDiagonal() * u.transpose());
}

}  // namespace

SpdMatrix::SpdMatrix(const Eigen::MatrixXd& values) {
  require_square(values, "SpdMatrix");
  values_ = symmetrized(values);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(values_, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) fail(ErrorCode::NoConvergence, "symmetric eigensolver failed");
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > kSpdEpsilon * hi)) {
    std::ostringstream os;
    os << "matrix is not SPD: eigenvalue range [" << lo << ", " << hi
       << "] violates min > " << kSpdEpsilon << " * max";
    fail(ErrorCode::NotSpd, os.str());
  }
}

SpdMatrix SpdMatrix::identity(Eigen::Index n) {
  return SpdMatrix(Eigen::MatrixXd::Identity(n, n), Trusted{});
}

TangentSymm::TangentSymm(const Eigen::MatrixXd& values) {
  require_square(values, "TangentSymm");
  require_symmetric(values, "TangentSymm");
  values_ = symmetrized(values);
}

Eigen::MatrixXd symm_fn(const Eigen::MatrixXd& m, MatrixFunction f) {
  require_square(m, "symm_fn");
  require_symmetric(m, "symm_fn");
  return apply_fn(symmetrized(m), f);
}

double affine_invariant_distance(const SpdMatrix& a, const SpdMatrix& b) {
  require_same_dim(a.dim(), b.dim(), "affine_invariant_distance");
  // Generalized problem b v = l a v has the spectrum of a^{-1/2} b a^{-1/2}.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
      b.values(), a.values(), Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) fail(ErrorCode::NoConvergence, "generalized eigensolver failed");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = std::log(es.eigenvalues()(i));
    sum += l * l;
  }
  return std::sqrt(sum);
}

TangentSymm log_map(const SpdMatrix& reference, const SpdMatrix& point) {
  require_same_dim(reference.dim(), point.dim(), "log_map");
  const Eigen::MatrixXd half = apply_fn(reference.values(), MatrixFunction::Sqrt);
  const Eigen::MatrixXd inv_half = apply_fn(reference.values(), MatrixFunction::InvSqrt);
  const Eigen::MatrixXd inner =
      apply_fn(symmetrized(inv_half * point.values() * inv_half), MatrixFunction::Log);
  return TangentSymm(symmetrized(half * inner * half));
}

SpdMatrix exp_map(const SpdMatrix& reference, const TangentSymm& tangent) {
  require_same_dim(reference.dim(), tangent.dim(), "exp_map");
  const Eigen::MatrixXd half = apply_fn(reference.values(), MatrixFunction::Sqrt);
  const Eigen::MatrixXd inv_half = apply_fn(reference.values(), MatrixFunction::InvSqrt);
  const Eigen::MatrixXd inner =
      apply_fn(symmetrized(inv_half * tangent.values() * inv_half), MatrixFunction::Exp);
  return SpdMatrix(symmetrized(half * inner * half));
}

SpdMatrix frechet_mean(std::span<const SpdMatrix> mats, double tol, int max_iter) {
  if (mats.empty()) fail(ErrorCode::EmptyInput, "frechet_mean: empty input");
  if (!(tol > 0.0)) fail(ErrorCode::InvalidArgument, "frechet_mean: tol must be positive");
  const Eigen::Index n = mats.front().dim();
  for (const auto& m : mats) require_same_dim(n, m.dim(), "frechet_mean");
  if (mats.size() == 1) return mats.front();

  const double inv_m = 1.0 / static_cast<double>(mats.size());
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
  for (const auto& m : mats) mean += m.values();
  mean *= inv_m;

  double residual = 0.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::MatrixXd half = apply_fn(mean, MatrixFunction::Sqrt);
    const Eigen::MatrixXd inv_half = apply_fn(mean, MatrixFunction::InvSqrt);
    Eigen::MatrixXd step = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : mats) {
      step += apply_fn(symmetrized(inv_half * m.values() * inv_half), MatrixFunction::Log);
    }
    step *= inv_m;
    residual = step.norm();
    mean = symmetrized(half * apply_fn(step, MatrixFunction::Exp) * half);
    if (residual < tol) return SpdMatrix(mean);
  }
  std::ostringstream os;
  os << "frechet_mean: no convergence after " << max_iter
     << " iterations (residual " << residual << ", tol " << tol << ")";
  throw FrechetNoConvergence(os.str(), SpdMatrix(mean), residual);
}

}  // namespace acm
