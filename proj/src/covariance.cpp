#include "acm/covariance.hpp"

#include <cmath>
#include <sstream>

#include "acm/error.hpp"

namespace acm {
namespace {

void require_valid_epoch(const Epoch& x) {
  if (x.channels() < 1 || x.samples() < 2) {
    std::ostringstream os;
    os << "epoch must have at least 1 channel and 2 samples, got " << x.channels() << "x"
       << x.samples();
    fail(ErrorCode::InvalidEpoch, os.str());
  }
  if (!x.data.allFinite()) fail(ErrorCode::InvalidEpoch, "epoch contains NaN or Inf");
}

void require_valid_params(const Epoch& x, const AugmentedParams& params) {
  if (params.order < 1 || params.lag < 1) {
    fail(ErrorCode::InvalidArgument, "order and lag must both be >= 1");
  }
  if (!params.valid_for(x.samples())) {
    std::ostringstream os;
    os << "(order-1)*lag = " << params.span() << " must be < epoch length " << x.samples();
    fail(ErrorCode::LagTooLarge, os.str());
  }
}

Eigen::MatrixXd scatter(const Eigen::MatrixXd& data) {
  Eigen::MatrixXd c = data * data.transpose() / static_cast<double>(data.cols() - 1);
  return 0.5 * (c + c.transpose());
}

}  // namespace

SpdMatrix sample_covariance(const Epoch& x) {
  require_valid_epoch(x);
  try {
    return SpdMatrix(scatter(x.data));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotSpd) throw;
    fail(ErrorCode::NotSpd,
         std::string(e.what()) + "; the epoch is rank deficient, consider shrinkage");
  }
}

Epoch embed_epoch(const Epoch& x, const AugmentedParams& params) {
  require_valid_epoch(x);
  require_valid_params(x, params);
  const Eigen::Index d = x.channels();
  const Eigen::Index width = x.samples() - params.span();
  Epoch out;
  out.sample_rate = x.sample_rate;
  out.data.resize(d * params.order, width);
  for (int k = 0; k < params.order; ++k) {
    const Eigen::Index offset = static_cast<Eigen::Index>(k) * params.lag;
    out.data.middleRows(k * d, d) = x.data.middleCols(offset, width);
  }
  return out;
}

SpdMatrix augmented_covariance(const Epoch& x, const AugmentedParams& params, bool shrink) {
  const Epoch stacked = embed_epoch(x, params);
  if (!shrink) return sample_covariance(stacked);
  return ledoit_wolf(scatter(stacked.data), stacked.data).covariance;
}

ShrunkCovariance ledoit_wolf(const Eigen::MatrixXd& covariance, const Eigen::MatrixXd& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index m = data.cols();
  if (n < 1 || m < 2 || covariance.rows() != n || covariance.cols() != n) {
    std::ostringstream os;
    os << "ledoit_wolf: covariance " << covariance.rows() << "x" << covariance.cols()
       << " does not match data " << n << "x" << m;
    fail(ErrorCode::InconsistentInput, os.str());
  }
  const Eigen::MatrixXd expected = scatter(data);
  const double scale = std::max(expected.norm(), 1e-300);
  if ((covariance - expected).norm() > 1e-8 * scale) {
    fail(ErrorCode::InconsistentInput,
         "ledoit_wolf: covariance is not data * data^T / (m - 1)");
  }

  // Moment estimates use the 1/m scatter of the original estimator.
  const double dm = static_cast<double>(m);
  const double dn = static_cast<double>(n);
  const Eigen::MatrixXd s = data * data.transpose() / dm;
  const double mu = s.trace() / dn;
  const double delta = (s - mu * Eigen::MatrixXd::Identity(n, n)).squaredNorm() / dn;
  const Eigen::RowVectorXd sq_norms = data.colwise().squaredNorm();
  const double fourth = sq_norms.array().square().sum();
  const double beta_bar = std::max(0.0, (fourth - dm * s.squaredNorm()) / (dm * dm * dn));
  const double beta = std::min(beta_bar, delta);
  const double lambda = delta > 0.0 ? beta / delta : 0.0;

  const Eigen::MatrixXd c = 0.5 * (covariance + covariance.transpose());
  const double target = c.trace() / dn;
  Eigen::MatrixXd shrunk = (1.0 - lambda) * c;
  shrunk.diagonal().array() += lambda * target;
  return ShrunkCovariance{SpdMatrix(shrunk), lambda};
}

YuleWalkerSolution yule_walker_solve(std::span<const Eigen::MatrixXd> gammas, int order) {
  if (order < 1) fail(ErrorCode::InvalidArgument, "yule_walker_solve: order must be >= 1");
  if (gammas.size() < static_cast<std::size_t>(order) + 1) {
    std::ostringstream os;
    os << "yule_walker_solve: need " << order + 1 << " lagged covariances, got " << gammas.size();
    fail(ErrorCode::InvalidArgument, os.str());
  }
  const Eigen::Index d = gammas[0].rows();
  for (const auto& g : gammas.first(order + 1)) {
    if (g.rows() != d || g.cols() != d) {
      fail(ErrorCode::DimensionMismatch, "yule_walker_solve: lagged covariances differ in shape");
    }
  }
  auto gamma = [&](long k) -> Eigen::MatrixXd {
    return k >= 0 ? gammas[k] : Eigen::MatrixXd(gammas[-k].transpose());
  };

  // Transposed normal equations: block (i, k) = Gamma(k - i), rhs block i = Gamma(i+1)^T.
  const Eigen::Index n = d * order;
  Eigen::MatrixXd system(n, n);
  Eigen::MatrixXd rhs(n, d);
  for (int i = 0; i < order; ++i) {
    for (int k = 0; k < order; ++k) system.block(i * d, k * d, d, d) = gamma(k - i);
    rhs.middleRows(i * d, d) = gammas[i + 1].transpose();
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    std::ostringstream os;
    os << "yule_walker_solve: block Toeplitz system is singular (rank " << lu.rank() << " of "
       << n << ")";
    fail(ErrorCode::SingularSystem, os.str());
  }
  const Eigen::MatrixXd solution = lu.solve(rhs);

  YuleWalkerSolution out;
  out.innovation = gammas[0];
  for (int k = 0; k < order; ++k) {
    out.coefficients.emplace_back(solution.middleRows(k * d, d).transpose());
    out.innovation -= out.coefficients.back() * gammas[k + 1].transpose();
  }
  out.innovation = (0.5 * (out.innovation + out.innovation.transpose())).eval();
  return out;
}

Eigen::MatrixXd lagged_covariance(const Epoch& x, int lag) {
  require_valid_epoch(x);
  if (lag < 0 || lag >= x.samples()) {
    fail(ErrorCode::LagTooLarge, "lagged_covariance: lag must be in [0, T)");
  }
  const Eigen::Index width = x.samples() - lag;
  return x.data.middleCols(lag, width) * x.data.leftCols(width).transpose() /
         static_cast<double>(x.samples());
}

}  // namespace acm
