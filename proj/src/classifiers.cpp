#include "acm/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "acm/error.hpp"

namespace acm {
namespace {

std::vector<int> ordered_classes(std::span<const int> labels, std::span<const int> classes) {
  std::vector<int> out(classes.begin(), classes.end());
  if (out.empty()) {
    out.assign(labels.begin(), labels.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// MDM

MdmModel mdm_fit(std::span<const SpdMatrix> covs, std::span<const int> labels,
                 std::span<const int> classes, double tol, int max_iter) {
  if (covs.size() != labels.size()) {
    fail(ErrorCode::LengthMismatch, "mdm_fit: covariance and label counts differ");
  }
  if (covs.empty()) fail(ErrorCode::EmptyInput, "mdm_fit: no training samples");
  MdmModel model;
  model.classes = ordered_classes(labels, classes);
  for (int cls : model.classes) {
    std::vector<SpdMatrix> members;
    for (std::size_t i = 0; i < covs.size(); ++i)
      if (labels[i] == cls) members.push_back(covs[i]);
    if (members.empty()) {
      fail(ErrorCode::EmptyClass, "mdm_fit: class " + std::to_string(cls) + " has no samples");
    }
    model.means.push_back(frechet_mean(members, tol, max_iter));
  }
  return model;
}

MdmPrediction mdm_predict(const MdmModel& model, const SpdMatrix& cov) {
  if (model.means.empty()) fail(ErrorCode::InvalidArgument, "mdm_predict: empty model");
  MdmPrediction out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < model.means.size(); ++k) {
    const double d = affine_invariant_distance(cov, model.means[k]);
    out.distances.push_back(d);
    if (d < best) {
      best = d;
      out.label = model.classes[k];
    }
  }
  if (out.distances.size() == 2) out.score = out.distances[0] - out.distances[1];
  return out;
}

// ---------------------------------------------------------------------------
// Tangent space

TangentMap::TangentMap(SpdMatrix reference)
    : reference_(std::move(reference)),
      inv_sqrt_(symm_fn(reference_.values(), MatrixFunction::InvSqrt)) {}

Eigen::VectorXd TangentMap::transform(const SpdMatrix& cov) const {
  if (cov.dim() != dim()) {
    std::ostringstream os;
    os << "tangent_transform: dimension " << cov.dim() << " does not match reference " << dim();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
  Eigen::MatrixXd whitened = inv_sqrt_ * cov.values() * inv_sqrt_;
  whitened = (0.5 * (whitened + whitened.transpose())).eval();
  const Eigen::MatrixXd log = symm_fn(whitened, MatrixFunction::Log);
  const Eigen::Index n = dim();
  Eigen::VectorXd out(output_len());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out(k++) = log(i, i);
    for (Eigen::Index j = i + 1; j < n; ++j) out(k++) = M_SQRT2 * log(i, j);
  }
  return out;
}

TangentMap tangent_fit(std::span<const SpdMatrix> covs, double tol, int max_iter) {
  return TangentMap(frechet_mean(covs, tol, max_iter));
}

Eigen::VectorXd tangent_transform(const TangentMap& map, const SpdMatrix& cov) {
  return map.transform(cov);
}

// ---------------------------------------------------------------------------
// SVM

const char* kernel_name(Kernel k) noexcept { return k == Kernel::Linear ? "linear" : "rbf"; }

Kernel parse_kernel(const std::string& name) {
  if (name == "linear") return Kernel::Linear;
  if (name == "rbf") return Kernel::Rbf;
  fail(ErrorCode::InvalidArgument, "unknown kernel '" + name + "' (expected linear or rbf)");
}

namespace {

double kernel_value(Kernel kernel, double gamma, const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (kernel == Kernel::Linear) return a.dot(b);
  return std::exp(-gamma * (a - b).squaredNorm());
}

Eigen::MatrixXd gram(Kernel kernel, double gamma, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  if (kernel == Kernel::Linear) {
    k = x * x.transpose();
  } else {
    const Eigen::VectorXd sq = x.rowwise().squaredNorm();
    k = x * x.transpose();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) k(i, j) = std::exp(-gamma * std::max(0.0, sq(i) + sq(j) - 2.0 * k(i, j)));
  }
  return k;
}

// Dual soft-margin problem solved by SMO with maximal-violating-pair
// selection using second order information (Fan, Chen and Lin).
BinarySvm solve_binary(const Eigen::MatrixXd& x, const Eigen::MatrixXd& k,
                       const Eigen::VectorXd& y, double c, double tol, long max_iter) {
  const Eigen::Index n = x.rows();
  constexpr double kTau = 1e-12;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = -Eigen::VectorXd::Ones(n);  // Q alpha - e
  auto q = [&](Eigen::Index i, Eigen::Index j) { return y(i) * y(j) * k(i, j); };
  auto in_up = [&](Eigen::Index t) {
    return (y(t) > 0 && alpha(t) < c) || (y(t) < 0 && alpha(t) > 0);
  };
  auto in_low = [&](Eigen::Index t) {
    return (y(t) > 0 && alpha(t) > 0) || (y(t) < 0 && alpha(t) < c);
  };

  BinarySvm out;
  long iter = 0;
  for (;; ++iter) {
    Eigen::Index i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(t) && -y(t) * grad(t) > gmax) {
        gmax = -y(t) * grad(t);
        i = t;
      }
    }
    Eigen::Index j = -1;
    double gmin = std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y(t) * grad(t);
      gmin = std::min(gmin, v);
      if (i >= 0 && v < gmax) {
        const double b = gmax - v;
        double a = k(i, i) + k(t, t) - 2.0 * k(i, t);
        if (a <= 0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj < best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    out.kkt_gap = (i >= 0 && std::isfinite(gmin)) ? gmax - gmin : 0.0;
    if (i < 0 || j < 0 || out.kkt_gap < tol) break;
    if (iter >= max_iter) {
      std::ostringstream os;
      os << "svm: SMO reached the iteration cap " << max_iter << " with KKT violation "
         << out.kkt_gap << " (tol " << tol << ")";
      fail(ErrorCode::SolverStall, os.str());
    }

    const double old_i = alpha(i), old_j = alpha(j);
    if (y(i) != y(j)) {
      double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) { alpha(j) = 0; alpha(i) = diff; }
      } else {
        if (alpha(i) < 0) { alpha(i) = 0; alpha(j) = -diff; }
      }
      if (diff > 0) {
        if (alpha(i) > c) { alpha(i) = c; alpha(j) = c - diff; }
      } else {
        if (alpha(j) > c) { alpha(j) = c; alpha(i) = c + diff; }
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > c) {
        if (alpha(i) > c) { alpha(i) = c; alpha(j) = sum - c; }
      } else {
        if (alpha(j) < 0) { alpha(j) = 0; alpha(i) = sum; }
      }
      if (sum > c) {
        if (alpha(j) > c) { alpha(j) = c; alpha(i) = sum - c; }
      } else {
        if (alpha(i) < 0) { alpha(i) = 0; alpha(j) = sum; }
      }
    }
    const double di = alpha(i) - old_i, dj = alpha(j) - old_j;
    for (Eigen::Index t = 0; t < n; ++t) grad(t) += q(i, t) * di + q(j, t) * dj;
  }
  out.iterations = iter;

  // rho as in libsvm: mean of y G over free vectors, else the feasible midpoint.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  long n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (alpha(t) >= c) {
      if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0) {
      if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      free_sum += yg;
    }
  }
  const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : (ub + lb) / 2.0;
  out.bias = -rho;

  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t)
    if (alpha(t) > 0) sv.push_back(t);
  out.support.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  out.coef.resize(static_cast<Eigen::Index>(sv.size()));
  out.alpha.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    out.support.row(static_cast<Eigen::Index>(s)) = x.row(sv[s]);
    out.coef(static_cast<Eigen::Index>(s)) = alpha(sv[s]) * y(sv[s]);
    out.alpha(static_cast<Eigen::Index>(s)) = alpha(sv[s]);
  }
  return out;
}

double machine_decision(const SvmModel& model, const BinarySvm& m, const Eigen::VectorXd& f) {
  double v = m.bias;
  for (Eigen::Index s = 0; s < m.support.rows(); ++s) {
    v += m.coef(s) * kernel_value(model.kernel, model.gamma, m.support.row(s).transpose(), f);
  }
  return v;
}

}  // namespace

SvmModel svm_fit(const Eigen::MatrixXd& features, std::span<const int> labels,
                 const SvmParams& params) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    fail(ErrorCode::LengthMismatch, "svm_fit: feature and label counts differ");
  }
  if (!features.allFinite()) fail(ErrorCode::InvalidArgument, "svm_fit: non-finite feature");
  if (!(params.c > 0.0)) fail(ErrorCode::InvalidArgument, "svm_fit: C must be positive");
  SvmModel model;
  model.kernel = params.kernel;
  model.c = params.c;
  model.classes = ordered_classes(labels, {});
  if (model.classes.size() < 2) fail(ErrorCode::OneClassOnly, "svm_fit: need at least two classes");

  model.gamma = params.gamma;
  if (model.kernel == Kernel::Rbf && !(model.gamma > 0.0)) {
    const double mean = features.mean();
    const double var = (features.array() - mean).square().mean();
    model.gamma = var > 0.0 ? 1.0 / (static_cast<double>(features.cols()) * var) : 1.0;
  }
  const long max_iter = params.max_iter > 0
                            ? params.max_iter
                            : std::max<long>(10000000L, 100L * static_cast<long>(features.rows()));
  const Eigen::MatrixXd k = gram(model.kernel, model.gamma, features);

  auto train_against = [&](int positive) {
    Eigen::VectorXd y(features.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = labels[i] == positive ? 1.0 : -1.0;
    return solve_binary(features, k, y, params.c, params.tol, max_iter);
  };
  if (model.classes.size() == 2) {
    model.machines.push_back(train_against(model.classes[1]));
  } else {
    for (int cls : model.classes) model.machines.push_back(train_against(cls));
  }
  return model;
}

Eigen::VectorXd svm_decision(const SvmModel& model, const Eigen::VectorXd& feature) {
  if (model.machines.empty()) fail(ErrorCode::InvalidArgument, "svm_decision: empty model");
  if (model.machines.front().support.cols() != feature.size() &&
      model.machines.front().support.rows() > 0) {
    fail(ErrorCode::DimensionMismatch, "svm_decision: feature length mismatch");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(model.machines.size()));
  for (std::size_t m = 0; m < model.machines.size(); ++m) {
    out(static_cast<Eigen::Index>(m)) = machine_decision(model, model.machines[m], feature);
  }
  return out;
}

int svm_predict(const SvmModel& model, const Eigen::VectorXd& feature) {
  const Eigen::VectorXd d = svm_decision(model, feature);
  if (model.classes.size() == 2) return d(0) > 0.0 ? model.classes[1] : model.classes[0];
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < d.size(); ++i)
    if (d(i) > d(best)) best = i;
  return model.classes[static_cast<std::size_t>(best)];
}

}  // namespace acm
