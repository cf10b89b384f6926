#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acm/classifiers.hpp"
#include "acm/covariance.hpp"
#include "acm/embedding.hpp"

namespace acm {

enum class PipelineKind { Mdm, AcmMdm, TangSvm, AcmTangSvm };
enum class ParamSource { Fixed, Grid, AmiCao, Mdop };

const char* pipeline_name(PipelineKind kind) noexcept;   // "MDM", "ACM+MDM", ...
PipelineKind parse_pipeline(const std::string& name);
const char* param_source_name(ParamSource source) noexcept;  // "fixed", "grid", ...
ParamSource parse_param_source(const std::string& name);

inline bool is_augmented(PipelineKind k) {
  return k == PipelineKind::AcmMdm || k == PipelineKind::AcmTangSvm;
}
inline bool uses_svm(PipelineKind k) {
  return k == PipelineKind::TangSvm || k == PipelineKind::AcmTangSvm;
}

struct SvmChoice {
  double c = 1.0;
  Kernel kernel = Kernel::Linear;
};

// C in {0.5, 1, 1.5} x kernel in {linear, rbf}, C-major.
std::vector<SvmChoice> default_svm_grid();

struct PipelineConfig {
  PipelineKind kind = PipelineKind::Mdm;
  ParamSource source = ParamSource::Fixed;
  AugmentedParams fixed{1, 1};
  std::vector<int> grid_orders{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> grid_lags{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<SvmChoice> svm_grid = default_svm_grid();
  Shrinkage shrinkage = Shrinkage::Auto;
  int inner_folds = 5;
  double frechet_tol = 1e-8;
  int frechet_max_iter = 50;
  AmiCaoOptions ami_cao;
  MdopOptions mdop;

  // Throws InvalidArgument on inconsistent combinations.
  void validate() const;
};

// Wall-clock seconds per stage of one fit/predict run.
struct TimingProfile {
  double select = 0.0;      // hyper-parameter selection (grid search or estimators)
  double covariance = 0.0;  // covariance / augmented covariance construction
  double fit = 0.0;         // Frechet means, tangent map, SVM
  double predict = 0.0;
  double total() const { return select + covariance + fit + predict; }
};

// Adds the elapsed time of its lifetime to a stage counter.
class StageTimer {
 public:
  explicit StageTimer(double* sink) : sink_(sink), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    if (sink_) {
      *sink_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
  }
  StageTimer(const StageTimer&) = delete;
  StageTimer& operator=(const StageTimer&) = delete;

 private:
  double* sink_;
  std::chrono::steady_clock::time_point start_;
};

// Classification head trained on covariances.
struct FittedHead {
  PipelineKind kind = PipelineKind::Mdm;
  std::vector<int> classes;
  std::optional<MdmModel> mdm;
  std::optional<TangentMap> tangent;
  std::optional<SvmModel> svm;
};

struct HeadOutput {
  int label = 0;
  double score = 0.0;  // binary ranking score, larger favours classes[1]
};

FittedHead fit_head(PipelineKind kind, std::span<const SpdMatrix> covs, std::span<const int> labels,
                    std::span<const int> classes, const SvmChoice& svm, const PipelineConfig& config);
HeadOutput predict_head(const FittedHead& head, const SpdMatrix& cov);

std::vector<SpdMatrix> build_covariances(const EpochRefs& epochs, const AugmentedParams& params,
                                         bool shrink, unsigned workers = 1);

// Stratified assignment of samples to `folds` folds: each class is shuffled
// with a seeded substream and dealt round-robin.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

// AUC for two classes (scores rank classes[1] above classes[0]), accuracy
// otherwise.
enum class Metric { Auc, Accuracy };
const char* metric_name(Metric m) noexcept;

struct GridCell {
  int order = 1;
  int lag = 1;
  int param_id = 0;  // index into the SVM grid, 0 for MDM heads
  bool valid = false;
  double mean_score = 0.0;
  int n_valid_folds = 0;
  std::string note;  // why a cell is invalid
};

struct GridSearchResult {
  AugmentedParams best_params;
  SvmChoice best_svm;
  int best_param_id = 0;
  double best_score = 0.0;
  Metric metric = Metric::Auc;
  std::vector<GridCell> cells;   // (order, lag, param_id) in domain order
  std::vector<std::string> tie_trace;
};

struct GridDomain {
  std::vector<int> orders;
  std::vector<int> lags;
  std::vector<SvmChoice> svm;  // ignored for MDM heads
};

// Stratified inner cross-validation over every (order, lag, classifier
// parameter) cell, using only the epochs passed in. Cells with
// (order-1)*lag >= T are recorded as invalid. Ties go to smaller order, then
// smaller lag, then earlier classifier parameters.
GridSearchResult grid_search(const EpochRefs& train, std::span<const int> labels,
                             std::span<const int> classes, PipelineKind kind,
                             const GridDomain& domain, const PipelineConfig& config,
                             std::uint64_t seed, unsigned workers = 1);

// Trained end-to-end model.
struct FittedPipeline {
  PipelineKind kind = PipelineKind::Mdm;
  ParamSource source = ParamSource::Fixed;
  AugmentedParams params;
  bool shrink = false;
  SvmChoice svm;
  int svm_param_id = 0;
  FittedHead head;
  std::optional<GridSearchResult> grid;
  std::optional<EmbeddingEstimate> estimate;
};

// Selects hyper-parameters on the training epochs only (grid search or
// embedding estimators), then fits the head on all of them.
FittedPipeline fit_pipeline(const PipelineConfig& config, const EpochRefs& train,
                            std::span<const int> labels, std::span<const int> classes,
                            std::uint64_t seed, TimingProfile* timing = nullptr,
                            unsigned workers = 1);

HeadOutput predict_pipeline(const FittedPipeline& model, const Epoch& epoch,
                            TimingProfile* timing = nullptr);

// Score of predictions against truth with the metric implied by the class
// count.
double score_predictions(std::span<const HeadOutput> outputs, std::span<const int> truth,
                         std::span<const int> classes);

}  // namespace acm
