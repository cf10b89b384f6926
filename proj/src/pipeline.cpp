#include "acm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "acm/error.hpp"
#include "acm/parallel.hpp"
#include "acm/random.hpp"
#include "acm/stats.hpp"

namespace acm {

const char* pipeline_name(PipelineKind kind) noexcept {
  switch (kind) {
    case PipelineKind::Mdm: return "MDM";
    case PipelineKind::AcmMdm: return "ACM+MDM";
    case PipelineKind::TangSvm: return "TANG+SVM";
    case PipelineKind::AcmTangSvm: return "ACM+TANG+SVM";
  }
  return "?";
}

PipelineKind parse_pipeline(const std::string& name) {
  for (auto k : {PipelineKind::Mdm, PipelineKind::AcmMdm, PipelineKind::TangSvm,
                 PipelineKind::AcmTangSvm}) {
    if (name == pipeline_name(k)) return k;
  }
  fail(ErrorCode::InvalidArgument,
       "unknown pipeline '" + name + "' (expected MDM, ACM+MDM, TANG+SVM or ACM+TANG+SVM)");
}

const char* param_source_name(ParamSource source) noexcept {
  switch (source) {
    case ParamSource::Fixed: return "fixed";
    case ParamSource::Grid: return "grid";
    case ParamSource::AmiCao: return "ami_cao";
    case ParamSource::Mdop: return "mdop";
  }
  return "?";
}

ParamSource parse_param_source(const std::string& name) {
  for (auto s : {ParamSource::Fixed, ParamSource::Grid, ParamSource::AmiCao, ParamSource::Mdop}) {
    if (name == param_source_name(s)) return s;
  }
  fail(ErrorCode::InvalidArgument,
       "unknown parameter source '" + name + "' (expected fixed, grid, ami_cao or mdop)");
}

std::vector<SvmChoice> default_svm_grid() {
  std::vector<SvmChoice> grid;
  for (double c : {0.5, 1.0, 1.5})
    for (Kernel k : {Kernel::Linear, Kernel::Rbf}) grid.push_back({c, k});
  return grid;
}

void PipelineConfig::validate() const {
  if (!is_augmented(kind) && (source == ParamSource::AmiCao || source == ParamSource::Mdop)) {
    fail(ErrorCode::InvalidArgument, std::string("pipeline ") + pipeline_name(kind) +
                                         " has no order/lag to estimate; use an ACM pipeline");
  }
  if (fixed.order < 1 || fixed.lag < 1) {
    fail(ErrorCode::InvalidArgument, "order and lag must be >= 1");
  }
  if (source == ParamSource::Grid && (grid_orders.empty() || grid_lags.empty())) {
    fail(ErrorCode::InvalidArgument, "grid domain is empty");
  }
  for (int v : grid_orders)
    if (v < 1) fail(ErrorCode::InvalidArgument, "grid orders must be >= 1");
  for (int v : grid_lags)
    if (v < 1) fail(ErrorCode::InvalidArgument, "grid lags must be >= 1");
  if (uses_svm(kind) && svm_grid.empty()) fail(ErrorCode::InvalidArgument, "SVM grid is empty");
  for (const auto& s : svm_grid)
    if (!(s.c > 0.0)) fail(ErrorCode::InvalidArgument, "SVM C must be positive");
  if (inner_folds < 2) fail(ErrorCode::InvalidArgument, "inner folds must be >= 2");
}

const char* metric_name(Metric m) noexcept { return m == Metric::Auc ? "auc" : "accuracy"; }

// ---------------------------------------------------------------------------

std::vector<SpdMatrix> build_covariances(const EpochRefs& epochs, const AugmentedParams& params,
                                         bool shrink, unsigned workers) {
  std::vector<std::optional<SpdMatrix>> slots(epochs.size());
  parallel_for(epochs.size(), workers, [&](std::size_t i) {
    slots[i].emplace(augmented_covariance(*epochs[i], params, shrink));
  });
  std::vector<SpdMatrix> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) fail(ErrorCode::InvalidArgument, "stratified_folds: need at least 2 folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<int> assignment(labels.size(), 0);
  int next = 0;
  for (auto& [cls, idx] : by_class) {
    if (static_cast<int>(idx.size()) < folds) {
      std::ostringstream os;
      os << "class " << cls << " has " << idx.size() << " samples, fewer than " << folds << " folds";
      fail(ErrorCode::TooFewSamples, os.str());
    }
    Rng rng(substream_key(seed, 0xF01D, static_cast<std::uint64_t>(cls)));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    // Continue dealing where the previous class stopped so fold sizes stay
    // balanced overall.
    for (std::size_t i : idx) {
      assignment[i] = next;
      next = (next + 1) % folds;
    }
  }
  return assignment;
}

// ---------------------------------------------------------------------------

namespace {

Metric metric_for(std::span<const int> classes) {
  return classes.size() == 2 ? Metric::Auc : Metric::Accuracy;
}

std::vector<SpdMatrix> take(std::span<const SpdMatrix> covs, const std::vector<std::size_t>& idx) {
  std::vector<SpdMatrix> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(covs[i]);
  return out;
}

std::vector<int> take(std::span<const int> labels, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

Eigen::MatrixXd tangent_features(const TangentMap& map, std::span<const SpdMatrix> covs) {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(covs.size()), map.output_len());
  for (std::size_t i = 0; i < covs.size(); ++i)
    f.row(static_cast<Eigen::Index>(i)) = map.transform(covs[i]).transpose();
  return f;
}

HeadOutput svm_output(const SvmModel& svm, const Eigen::VectorXd& feature) {
  const Eigen::VectorXd d = svm_decision(svm, feature);
  HeadOutput out;
  if (svm.classes.size() == 2) {
    out.score = d(0);
    out.label = d(0) > 0 ? svm.classes[1] : svm.classes[0];
  } else {
    Eigen::Index best = 0;
    d.maxCoeff(&best);
    out.label = svm.classes[static_cast<std::size_t>(best)];
  }
  return out;
}

std::string cell_name(int order, int lag, int param_id) {
  std::ostringstream os;
  os << "(order=" << order << ", lag=" << lag << ", param=" << param_id << ")";
  return os.str();
}

}  // namespace

FittedHead fit_head(PipelineKind kind, std::span<const SpdMatrix> covs, std::span<const int> labels,
                    std::span<const int> classes, const SvmChoice& svm,
                    const PipelineConfig& config) {
  FittedHead head;
  head.kind = kind;
  head.classes.assign(classes.begin(), classes.end());
  if (!uses_svm(kind)) {
    head.mdm = mdm_fit(covs, labels, classes, config.frechet_tol, config.frechet_max_iter);
    return head;
  }
  head.tangent = tangent_fit(covs, config.frechet_tol, config.frechet_max_iter);
  SvmParams params;
  params.c = svm.c;
  params.kernel = svm.kernel;
  head.svm = svm_fit(tangent_features(*head.tangent, covs), labels, params);
  return head;
}

HeadOutput predict_head(const FittedHead& head, const SpdMatrix& cov) {
  if (head.mdm) {
    const MdmPrediction p = mdm_predict(*head.mdm, cov);
    return {p.label, p.score};
  }
  if (head.tangent && head.svm) return svm_output(*head.svm, head.tangent->transform(cov));
  fail(ErrorCode::InvalidArgument, "predict_head: head is not fitted");
}

double score_predictions(std::span<const HeadOutput> outputs, std::span<const int> truth,
                         std::span<const int> classes) {
  if (outputs.size() != truth.size()) fail(ErrorCode::LengthMismatch, "score: length mismatch");
  if (metric_for(classes) == Metric::Auc) {
    std::vector<double> scores;
    std::vector<int> positive;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      scores.push_back(outputs[i].score);
      positive.push_back(truth[i] == classes[1] ? 1 : 0);
    }
    return auc_roc(scores, positive);
  }
  std::vector<int> pred;
  for (const auto& o : outputs) pred.push_back(o.label);
  return accuracy(pred, truth);
}

// ---------------------------------------------------------------------------

GridSearchResult grid_search(const EpochRefs& train, std::span<const int> labels,
                             std::span<const int> classes, PipelineKind kind,
                             const GridDomain& domain, const PipelineConfig& config,
                             std::uint64_t seed, unsigned workers) {
  if (train.size() != labels.size()) fail(ErrorCode::LengthMismatch, "grid_search: label count");
  if (train.empty()) fail(ErrorCode::EmptyInput, "grid_search: no training epochs");
  if (domain.orders.empty() || domain.lags.empty()) {
    fail(ErrorCode::InvalidArgument, "grid_search: empty order/lag domain");
  }
  const bool svm = uses_svm(kind);
  const std::size_t n_param = svm ? domain.svm.size() : 1;
  if (n_param == 0) fail(ErrorCode::InvalidArgument, "grid_search: empty SVM grid");

  const int folds = config.inner_folds;
  const std::vector<int> fold_of = stratified_folds(labels, folds, seed);
  const Eigen::Index samples = train.front()->samples();

  GridSearchResult result;
  result.metric = metric_for(classes);
  const std::size_t n_pairs = domain.orders.size() * domain.lags.size();
  result.cells.resize(n_pairs * n_param);

  // Each (order, lag) pair owns the slice of cells for all its classifier
  // parameters; pairs evaluate independently.
  parallel_for(n_pairs, workers, [&](std::size_t pair) {
    const int order = domain.orders[pair / domain.lags.size()];
    const int lag = domain.lags[pair % domain.lags.size()];
    GridCell* cells = &result.cells[pair * n_param];
    for (std::size_t q = 0; q < n_param; ++q) {
      cells[q].order = order;
      cells[q].lag = lag;
      cells[q].param_id = static_cast<int>(q);
    }
    const AugmentedParams params{order, lag};
    if (!params.valid_for(samples)) {
      for (std::size_t q = 0; q < n_param; ++q) cells[q].note = "(order-1)*lag >= epoch length";
      return;
    }
    std::vector<SpdMatrix> covs;
    try {
      covs = build_covariances(train, params, shrinkage_enabled(config.shrinkage, params));
    } catch (const Error& e) {
      if (!is_numerical(e.code())) throw;
      for (std::size_t q = 0; q < n_param; ++q) cells[q].note = error_code_name(e.code());
      return;
    }
    std::vector<double> sums(n_param, 0.0);
    std::vector<std::string> notes(n_param);
    for (int f = 0; f < folds; ++f) {
      std::vector<std::size_t> tr, te;
      for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? te : tr).push_back(i);
      const std::vector<SpdMatrix> tr_covs = take(covs, tr);
      const std::vector<int> tr_labels = take(labels, tr);
      const std::vector<int> te_labels = take(labels, te);
      try {
        if (!svm) {
          const MdmModel model =
              mdm_fit(tr_covs, tr_labels, classes, config.frechet_tol, config.frechet_max_iter);
          std::vector<HeadOutput> out;
          for (std::size_t i : te) {
            const MdmPrediction p = mdm_predict(model, covs[i]);
            out.push_back({p.label, p.score});
          }
          sums[0] += score_predictions(out, te_labels, classes);
          ++cells[0].n_valid_folds;
          continue;
        }
        const TangentMap map = tangent_fit(tr_covs, config.frechet_tol, config.frechet_max_iter);
        const Eigen::MatrixXd tr_f = tangent_features(map, tr_covs);
        std::vector<Eigen::VectorXd> te_f;
        for (std::size_t i : te) te_f.push_back(map.transform(covs[i]));
        for (std::size_t q = 0; q < n_param; ++q) {
          try {
            SvmParams sp;
            sp.c = domain.svm[q].c;
            sp.kernel = domain.svm[q].kernel;
            const SvmModel model = svm_fit(tr_f, tr_labels, sp);
            std::vector<HeadOutput> out;
            for (const auto& x : te_f) out.push_back(svm_output(model, x));
            sums[q] += score_predictions(out, te_labels, classes);
            ++cells[q].n_valid_folds;
          } catch (const Error& e) {
            if (!is_numerical(e.code())) throw;
            notes[q] = error_code_name(e.code());
          }
        }
      } catch (const Error& e) {
        if (!is_numerical(e.code())) throw;
        for (auto& n : notes) n = error_code_name(e.code());
      }
    }
    for (std::size_t q = 0; q < n_param; ++q) {
      // A cell only competes when every inner fold produced a score.
      cells[q].valid = cells[q].n_valid_folds == folds;
      if (cells[q].n_valid_folds > 0) cells[q].mean_score = sums[q] / cells[q].n_valid_folds;
      if (!cells[q].valid) cells[q].note = notes[q].empty() ? "incomplete folds" : notes[q];
    }
  });

  // Scan in (order, lag, param) order so the first maximum is the tie-break
  // winner whatever order the domain was given in.
  std::vector<std::size_t> scan(result.cells.size());
  for (std::size_t i = 0; i < scan.size(); ++i) scan[i] = i;
  std::stable_sort(scan.begin(), scan.end(), [&](std::size_t a, std::size_t b) {
    const GridCell& x = result.cells[a];
    const GridCell& y = result.cells[b];
    if (x.order != y.order) return x.order < y.order;
    if (x.lag != y.lag) return x.lag < y.lag;
    return x.param_id < y.param_id;
  });
  const GridCell* best = nullptr;
  for (std::size_t i : scan) {
    const GridCell& c = result.cells[i];
    if (!c.valid) continue;
    if (!best || c.mean_score > best->mean_score) {
      best = &c;
    } else if (c.mean_score == best->mean_score) {
      result.tie_trace.push_back(cell_name(c.order, c.lag, c.param_id) + " ties " +
                                 cell_name(best->order, best->lag, best->param_id) +
                                 "; kept the latter");
    }
  }
  if (!best) fail(ErrorCode::AllCellsInvalid, "grid_search: every grid cell is invalid");
  result.best_params = {best->order, best->lag};
  result.best_param_id = best->param_id;
  if (svm) result.best_svm = domain.svm[static_cast<std::size_t>(best->param_id)];
  result.best_score = best->mean_score;
  return result;
}

// ---------------------------------------------------------------------------

FittedPipeline fit_pipeline(const PipelineConfig& config, const EpochRefs& train,
                            std::span<const int> labels, std::span<const int> classes,
                            std::uint64_t seed, TimingProfile* timing, unsigned workers) {
  config.validate();
  if (train.empty()) fail(ErrorCode::EmptyInput, "fit_pipeline: no training epochs");
  FittedPipeline model;
  model.kind = config.kind;
  model.source = config.source;
  const bool augmented = is_augmented(config.kind);
  const bool svm = uses_svm(config.kind);

  GridDomain domain;
  domain.svm = config.svm_grid;
  bool search = false;
  {
    StageTimer t(timing ? &timing->select : nullptr);
    switch (config.source) {
      case ParamSource::Fixed:
        model.params = augmented ? config.fixed : AugmentedParams{1, 1};
        break;
      case ParamSource::Grid:
        model.params = {1, 1};
        if (augmented) {
          domain.orders = config.grid_orders;
          domain.lags = config.grid_lags;
          std::sort(domain.orders.begin(), domain.orders.end());
          domain.orders.erase(std::unique(domain.orders.begin(), domain.orders.end()),
                              domain.orders.end());
          std::sort(domain.lags.begin(), domain.lags.end());
          domain.lags.erase(std::unique(domain.lags.begin(), domain.lags.end()), domain.lags.end());
          search = true;
        }
        break;
      case ParamSource::AmiCao:
        model.estimate = ami_cao(train, config.ami_cao);
        model.params = model.estimate->params();
        break;
      case ParamSource::Mdop:
        model.estimate = mdop_unified(train, config.mdop);
        model.params = model.estimate->params();
        break;
    }
    if (!search && svm && config.svm_grid.size() > 1) search = true;
    if (search) {
      if (domain.orders.empty()) {
        domain.orders = {model.params.order};
        domain.lags = {model.params.lag};
      }
      model.grid = grid_search(train, labels, classes, config.kind, domain, config, seed, workers);
      model.params = model.grid->best_params;
      model.svm = model.grid->best_svm;
      model.svm_param_id = model.grid->best_param_id;
    } else if (svm) {
      model.svm = config.svm_grid.front();
    }
  }
  if (!model.params.valid_for(train.front()->samples())) {
    std::ostringstream os;
    os << "order " << model.params.order << " with lag " << model.params.lag
       << " does not fit in epochs of " << train.front()->samples() << " samples";
    fail(ErrorCode::LagTooLarge, os.str());
  }
  model.shrink = shrinkage_enabled(config.shrinkage, model.params);
  std::vector<SpdMatrix> covs;
  {
    StageTimer t(timing ? &timing->covariance : nullptr);
    covs = build_covariances(train, model.params, model.shrink, workers);
  }
  {
    StageTimer t(timing ? &timing->fit : nullptr);
    model.head = fit_head(config.kind, covs, labels, classes, model.svm, config);
  }
  return model;
}

HeadOutput predict_pipeline(const FittedPipeline& model, const Epoch& epoch,
                            TimingProfile* timing) {
  std::optional<SpdMatrix> cov;
  {
    StageTimer t(timing ? &timing->covariance : nullptr);
    cov.emplace(augmented_covariance(epoch, model.params,
                                     model.shrink));
  }
  StageTimer t(timing ? &timing->predict : nullptr);
  return predict_head(model.head, *cov);
}

}  // namespace acm
