#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acm/data_io.hpp"
#include "acm/pipeline.hpp"

namespace acm {

enum class EvalMode { WithinSession, CrossSession };

const char* eval_mode_name(EvalMode mode) noexcept;  // "ws" / "cs"
EvalMode parse_eval_mode(const std::string& name);

struct Prediction {
  int epoch = 0;  // index within its session
  int truth = 0;
  int label = 0;
  double score = 0.0;
};

// One outer split: a fold of one session (ws) or a held-out session (cs).
struct SplitResult {
  std::string session;  // session the test epochs come from
  std::string split;    // "fold-<k>" or "holdout"
  double score = 0.0;
  int n_train = 0;
  int n_test = 0;
  AugmentedParams params;
  SvmChoice svm;
  bool has_svm = false;
  std::optional<GridSearchResult> grid;
  std::optional<EmbeddingEstimate> estimate;
  std::vector<Prediction> predictions;
  TimingProfile timing;  // kept out of the JSON report
};

struct SubjectResult {
  std::string subject;
  std::vector<SplitResult> splits;
  std::map<std::string, double> session_means;  // ws: fold mean per session
  double mean_score = 0.0;                        // mean over splits (cs) or sessions (ws)
};

struct EvalReport {
  std::string dataset;
  std::string pipeline;
  std::string param_source;
  EvalMode mode = EvalMode::WithinSession;
  Metric metric = Metric::Auc;
  int folds = 5;
  std::uint64_t seed = 0;
  std::vector<SubjectResult> subjects;
  double mean = 0.0;  // over subject means
  double std = 0.0;   // sample standard deviation over subject means

  // Recomputes subject means and the dataset summary from the splits.
  void summarize();
};

// Stratified seeded k-fold CV inside every session. Hyper-parameter selection
// runs on the training folds only.
EvalReport within_session_eval(const std::vector<EpochSet>& subjects, const PipelineConfig& config,
                               int folds, std::uint64_t seed, unsigned workers = 1);

// Leave-one-session-out per subject.
EvalReport cross_session_eval(const std::vector<EpochSet>& subjects, const PipelineConfig& config,
                              std::uint64_t seed, unsigned workers = 1);

// Canonical JSON (sorted keys, no timings) so reruns compare byte for byte.
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// subject,session,split,epoch,truth,predicted,score
std::string scores_csv(const EvalReport& report);
// subject,session,split,select_s,covariance_s,fit_s,predict_s,total_s
std::string timing_csv(const EvalReport& report);
// order,lag,param_id,mean_score,n_valid_folds
std::string grid_csv(const GridSearchResult& grid);

// Mean and sample standard deviation of each stage over repeated runs.
struct TimingSummary {
  TimingProfile mean;
  TimingProfile std;
  int runs = 0;
};
TimingSummary summarize_timings(const std::vector<TimingProfile>& runs);

// ---------------------------------------------------------------------------
// Meta-analysis

struct HypothesisResult {
  std::string hypothesis;  // "<candidate> > <baseline>"
  std::string baseline;
  std::string candidate;
  std::map<std::string, double> p_raw;        // per dataset
  std::map<std::string, std::string> test;    // per dataset: "wilcoxon" / "permutation_t"
  std::map<std::string, int> n_subjects;      // per dataset
  double p_combined = 0.0;                    // Stouffer over datasets
  double p_corrected = 0.0;                   // Bonferroni
  double smd = 0.0;                           // Cohen's d of pooled paired differences
};

struct MetaAnalysis {
  int correction_factor = 1;
  std::vector<HypothesisResult> hypotheses;
};

inline constexpr int kWilcoxonMinSubjects = 20;

// Reports are grouped by dataset; within a dataset the k-th report is the k-th
// candidate, and every dataset must list the same candidates over the same
// subjects and splits. Every ordered pair of candidates is one hypothesis.
MetaAnalysis meta_analysis(const std::vector<EvalReport>& reports, long n_perm = 10000,
                           std::uint64_t seed = 0);
std::string meta_to_json(const MetaAnalysis& meta);

}  // namespace acm
