#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acm/spd.hpp"

namespace acm {

// ---------------------------------------------------------------------------
// Minimum distance to the mean

struct MdmModel {
  std::vector<int> classes;  // ascending
  std::vector<SpdMatrix> means;
};

struct MdmPrediction {
  int label = 0;
  std::vector<double> distances;  // per class, in model order
  // Binary ranking score d(cov, mean_0) - d(cov, mean_1); larger favours
  // classes[1]. Zero for more than two classes.
  double score = 0.0;
};

// Per-class Frechet means. `classes` lists the expected labels in order; when
// empty it is taken as the sorted distinct labels.
MdmModel mdm_fit(std::span<const SpdMatrix> covs, std::span<const int> labels,
                 std::span<const int> classes = {}, double tol = 1e-8, int max_iter = 50);

// Nearest class mean; exact ties go to the earlier class.
MdmPrediction mdm_predict(const MdmModel& model, const SpdMatrix& cov);

// ---------------------------------------------------------------------------
// Tangent space

class TangentMap {
 public:
  explicit TangentMap(SpdMatrix reference);

  const SpdMatrix& reference() const noexcept { return reference_; }
  Eigen::Index dim() const noexcept { return reference_.dim(); }
  Eigen::Index output_len() const noexcept { return dim() * (dim() + 1) / 2; }

  // Upper triangle (row-major) of log(R^{-1/2} C R^{-1/2}), off-diagonal
  // entries scaled by sqrt(2) so the Euclidean norm equals the Riemannian
  // distance to the reference.
  Eigen::VectorXd transform(const SpdMatrix& cov) const;

 private:
  SpdMatrix reference_;
  Eigen::MatrixXd inv_sqrt_;
};

TangentMap tangent_fit(std::span<const SpdMatrix> covs, double tol = 1e-8, int max_iter = 50);
Eigen::VectorXd tangent_transform(const TangentMap& map, const SpdMatrix& cov);

// ---------------------------------------------------------------------------
// Support vector machine

enum class Kernel { Linear, Rbf };

const char* kernel_name(Kernel k) noexcept;
Kernel parse_kernel(const std::string& name);

struct SvmParams {
  double c = 1.0;
  Kernel kernel = Kernel::Linear;
  double gamma = 0.0;  // rbf width; <= 0 selects 1 / (n_features * var(X))
  double tol = 1e-3;   // maximal KKT violation at convergence
  long max_iter = 0;   // <= 0 selects max(10^7, 100 n)
};

// One binary soft-margin machine; f(x) = sum_i coef_i K(sv_i, x) + bias.
struct BinarySvm {
  Eigen::MatrixXd support;  // rows are support vectors
  Eigen::VectorXd coef;     // alpha_i * y_i
  Eigen::VectorXd alpha;    // alpha_i, within [0, C]
  double bias = 0.0;
  double kkt_gap = 0.0;     // max violation when the solver stopped
  long iterations = 0;
};

struct SvmModel {
  Kernel kernel = Kernel::Linear;
  double c = 1.0;
  double gamma = 0.0;
  std::vector<int> classes;          // ascending
  std::vector<BinarySvm> machines;   // one (classes[1] positive) or one per class
};

// Rows of `features` are samples. Binary problems train a single machine
// with classes[1] as the positive class; more classes train one-vs-rest.
SvmModel svm_fit(const Eigen::MatrixXd& features, std::span<const int> labels,
                 const SvmParams& params);

// Binary: one signed value (positive favours classes[1]). Multi-class: one
// value per class.
Eigen::VectorXd svm_decision(const SvmModel& model, const Eigen::VectorXd& feature);
int svm_predict(const SvmModel& model, const Eigen::VectorXd& feature);

}  // namespace acm
