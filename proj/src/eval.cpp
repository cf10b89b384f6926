#include "acm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "acm/error.hpp"
#include "acm/parallel.hpp"
#include "acm/random.hpp"
#include "acm/stats.hpp"

namespace acm {

using json = nlohmann::json;

const char* eval_mode_name(EvalMode mode) noexcept {
  return mode == EvalMode::WithinSession ? "ws" : "cs";
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "ws") return EvalMode::WithinSession;
  if (name == "cs") return EvalMode::CrossSession;
  fail(ErrorCode::InvalidArgument, "unknown evaluation '" + name + "' (expected ws or cs)");
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<int> class_indices(const EpochSet& set) {
  std::vector<int> classes(set.classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) classes[i] = static_cast<int>(i);
  return classes;
}

// One outer split waiting to run.
struct Task {
  std::size_t subject = 0;
  std::size_t session = 0;  // test session
  int fold = -1;            // -1 for a held-out session
};

SplitResult run_split(const EpochSet& set, const PipelineConfig& config,
                      const EpochRefs& train, const std::vector<int>& train_labels,
                      const EpochRefs& test, const std::vector<int>& test_labels,
                      const std::vector<int>& test_index, std::uint64_t inner_seed,
                      unsigned workers) {
  const std::vector<int> classes = class_indices(set);
  SplitResult r;
  r.n_train = static_cast<int>(train.size());
  r.n_test = static_cast<int>(test.size());
  const FittedPipeline model =
      fit_pipeline(config, train, train_labels, classes, inner_seed, &r.timing, workers);
  r.params = model.params;
  r.has_svm = uses_svm(config.kind);
  r.svm = model.svm;
  r.grid = model.grid;
  r.estimate = model.estimate;
  std::vector<HeadOutput> outputs;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const HeadOutput o = predict_pipeline(model, *test[i], &r.timing);
    outputs.push_back(o);
    r.predictions.push_back({test_index[i], test_labels[i], o.label, o.score});
  }
  r.score = score_predictions(outputs, test_labels, classes);
  return r;
}

EvalReport run_tasks(const std::vector<EpochSet>& subjects, const PipelineConfig& config,
                     EvalMode mode, int folds, std::uint64_t seed, unsigned workers) {
  config.validate();
  if (subjects.empty()) fail(ErrorCode::EmptyInput, "evaluation: no subjects");
  for (const auto& s : subjects) s.validate();
  const std::size_t n_classes = subjects.front().classes.size();
  for (const auto& s : subjects) {
    if (s.classes != subjects.front().classes) {
      fail(ErrorCode::InvalidArgument, "evaluation: subjects disagree on class names");
    }
  }

  // Outer fold assignments are drawn up front so they only depend on the
  // seed and the session position.
  std::vector<Task> tasks;
  std::vector<std::vector<std::vector<int>>> fold_of(subjects.size());
  for (std::size_t si = 0; si < subjects.size(); ++si) {
    const EpochSet& set = subjects[si];
    if (mode == EvalMode::CrossSession) {
      if (set.sessions.size() < 2) {
        fail(ErrorCode::SingleSession, "cross-session evaluation needs at least 2 sessions; subject '" +
                                           set.subject + "' has " +
                                           std::to_string(set.sessions.size()));
      }
      for (std::size_t k = 0; k < set.sessions.size(); ++k) tasks.push_back({si, k, -1});
      continue;
    }
    fold_of[si].resize(set.sessions.size());
    for (std::size_t k = 0; k < set.sessions.size(); ++k) {
      const Session& sess = set.sessions[k];
      for (std::size_t c = 0; c < n_classes; ++c) {
        const auto count = std::count(sess.labels.begin(), sess.labels.end(), static_cast<int>(c));
        if (count < folds) {
          std::ostringstream os;
          os << "subject '" << set.subject << "' session '" << sess.id << "' has " << count
             << " epochs of class '" << set.classes[c] << "', fewer than " << folds << " folds";
          fail(ErrorCode::TooFewSamples, os.str());
        }
      }
      fold_of[si][k] = stratified_folds(sess.labels, folds, substream_key(seed, 0x5753, si, k));
      for (int f = 0; f < folds; ++f) tasks.push_back({si, k, f});
    }
  }

  const unsigned outer = static_cast<unsigned>(
      std::min<std::size_t>(std::max(1u, workers), tasks.size()));
  const unsigned inner = std::max(1u, std::max(1u, workers) / outer);
  std::vector<SplitResult> results(tasks.size());
  parallel_for(tasks.size(), outer, [&](std::size_t t) {
    const Task& task = tasks[t];
    const EpochSet& set = subjects[task.subject];
    EpochRefs train, test;
    std::vector<int> train_labels, test_labels, test_index;
    std::uint64_t inner_seed = 0;
    if (task.fold >= 0) {
      const Session& sess = set.sessions[task.session];
      const std::vector<int>& folds_here = fold_of[task.subject][task.session];
      for (std::size_t i = 0; i < sess.epochs.size(); ++i) {
        if (folds_here[i] == task.fold) {
          test.push_back(&sess.epochs[i]);
          test_labels.push_back(sess.labels[i]);
          test_index.push_back(static_cast<int>(i));
        } else {
          train.push_back(&sess.epochs[i]);
          train_labels.push_back(sess.labels[i]);
        }
      }
      inner_seed = substream_key(seed, task.subject, task.session, static_cast<std::uint64_t>(task.fold));
    } else {
      for (std::size_t k = 0; k < set.sessions.size(); ++k) {
        const Session& sess = set.sessions[k];
        for (std::size_t i = 0; i < sess.epochs.size(); ++i) {
          if (k == task.session) {
            test.push_back(&sess.epochs[i]);
            test_labels.push_back(sess.labels[i]);
            test_index.push_back(static_cast<int>(i));
          } else {
            train.push_back(&sess.epochs[i]);
            train_labels.push_back(sess.labels[i]);
          }
        }
      }
      inner_seed = substream_key(seed, task.subject, task.session, 0x4353);
    }
    SplitResult r = run_split(set, config, train, train_labels, test, test_labels, test_index,
                              inner_seed, inner);
    r.session = set.sessions[task.session].id;
    r.split = task.fold >= 0 ? "fold-" + std::to_string(task.fold) : "holdout";
    results[t] = std::move(r);
  });

  EvalReport report;
  report.pipeline = pipeline_name(config.kind);
  report.param_source = param_source_name(config.source);
  report.mode = mode;
  report.metric = n_classes == 2 ? Metric::Auc : Metric::Accuracy;
  report.folds = mode == EvalMode::WithinSession ? folds : 0;
  report.seed = seed;
  report.subjects.resize(subjects.size());
  for (std::size_t si = 0; si < subjects.size(); ++si) report.subjects[si].subject = subjects[si].subject;
  for (std::size_t t = 0; t < tasks.size(); ++t)
    report.subjects[tasks[t].subject].splits.push_back(std::move(results[t]));
  report.summarize();
  return report;
}

}  // namespace

void EvalReport::summarize() {
  std::vector<double> subject_means;
  for (auto& s : subjects) {
    std::map<std::string, std::vector<double>> by_session;
    for (const auto& sp : s.splits) by_session[sp.session].push_back(sp.score);
    s.session_means.clear();
    std::vector<double> means;
    for (const auto& [id, scores] : by_session) {
      s.session_means[id] = mean_of(scores);
      means.push_back(s.session_means[id]);
    }
    s.mean_score = mean_of(means);
    subject_means.push_back(s.mean_score);
  }
  mean = mean_of(subject_means);
  std = sample_std(subject_means);
}

EvalReport within_session_eval(const std::vector<EpochSet>& subjects, const PipelineConfig& config,
                               int folds, std::uint64_t seed, unsigned workers) {
  if (folds < 2) fail(ErrorCode::InvalidArgument, "within-session evaluation needs >= 2 folds");
  return run_tasks(subjects, config, EvalMode::WithinSession, folds, seed, workers);
}

EvalReport cross_session_eval(const std::vector<EpochSet>& subjects, const PipelineConfig& config,
                              std::uint64_t seed, unsigned workers) {
  return run_tasks(subjects, config, EvalMode::CrossSession, 0, seed, workers);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json split_to_json(const SplitResult& r) {
  json j;
  j["session"] = r.session;
  j["split"] = r.split;
  j["score"] = r.score;
  j["n_train"] = r.n_train;
  j["n_test"] = r.n_test;
  j["order"] = r.params.order;
  j["lag"] = r.params.lag;
  if (r.has_svm) j["svm"] = {{"c", r.svm.c}, {"kernel", kernel_name(r.svm.kernel)}};
  if (r.grid) {
    std::size_t invalid = 0;
    for (const auto& c : r.grid->cells) invalid += !c.valid;
    j["grid"] = {{"best_score", r.grid->best_score},
                 {"n_cells", r.grid->cells.size()},
                 {"n_invalid", invalid},
                 {"tie_trace", r.grid->tie_trace}};
  }
  if (r.estimate) {
    j["estimate"] = {{"tau", r.estimate->tau},
                     {"dimension", r.estimate->dimension},
                     {"method", r.estimate->method},
                     {"flagged", r.estimate->flagged},
                     {"flag", r.estimate->flag}};
  }
  json preds = json::array();
  for (const auto& p : r.predictions)
    preds.push_back({{"epoch", p.epoch}, {"truth", p.truth}, {"label", p.label}, {"score", p.score}});
  j["predictions"] = std::move(preds);
  return j;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    fail(ErrorCode::FormatError, "report: missing field '" + std::string(key) + "' in " + where);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::FormatError, "report: field '" + std::string(key) + "' in " + where +
                                     " has the wrong type");
  }
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  json j;
  j["format"] = "acm-eval-report";
  j["version"] = 1;
  j["dataset"] = report.dataset;
  j["pipeline"] = report.pipeline;
  j["param_source"] = report.param_source;
  j["evaluation"] = eval_mode_name(report.mode);
  j["metric"] = metric_name(report.metric);
  j["folds"] = report.folds;
  j["seed"] = report.seed;
  j["summary"] = {{"mean", report.mean}, {"std", report.std}, {"n_subjects", report.subjects.size()}};
  json subjects = json::array();
  for (const auto& s : report.subjects) {
    json js;
    js["subject"] = s.subject;
    js["mean_score"] = s.mean_score;
    js["session_means"] = s.session_means;
    json splits = json::array();
    for (const auto& r : s.splits) splits.push_back(split_to_json(r));
    js["splits"] = std::move(splits);
    subjects.push_back(std::move(js));
  }
  j["subjects"] = std::move(subjects);
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::FormatError, std::string("report: invalid JSON: ") + e.what());
  }
  if (field<std::string>(j, "format", "report") != "acm-eval-report") {
    fail(ErrorCode::FormatError, "report: not an evaluation report");
  }
  const int version = field<int>(j, "version", "report");
  if (version != 1) {
    fail(ErrorCode::VersionUnsupported, "report: unsupported version " + std::to_string(version));
  }
  EvalReport r;
  r.dataset = field<std::string>(j, "dataset", "report");
  r.pipeline = field<std::string>(j, "pipeline", "report");
  r.param_source = field<std::string>(j, "param_source", "report");
  r.mode = parse_eval_mode(field<std::string>(j, "evaluation", "report"));
  r.metric = field<std::string>(j, "metric", "report") == "auc" ? Metric::Auc : Metric::Accuracy;
  r.folds = field<int>(j, "folds", "report");
  r.seed = field<std::uint64_t>(j, "seed", "report");
  for (const auto& js : field<json>(j, "subjects", "report")) {
    SubjectResult s;
    s.subject = field<std::string>(js, "subject", "subject entry");
    const std::string where = "subject '" + s.subject + "'";
    for (const auto& jr : field<json>(js, "splits", where)) {
      SplitResult sp;
      sp.session = field<std::string>(jr, "session", where);
      sp.split = field<std::string>(jr, "split", where);
      sp.score = field<double>(jr, "score", where);
      sp.n_train = field<int>(jr, "n_train", where);
      sp.n_test = field<int>(jr, "n_test", where);
      sp.params = {field<int>(jr, "order", where), field<int>(jr, "lag", where)};
      if (jr.contains("svm")) {
        sp.has_svm = true;
        sp.svm.c = field<double>(jr["svm"], "c", where);
        sp.svm.kernel = parse_kernel(field<std::string>(jr["svm"], "kernel", where));
      }
      if (jr.contains("predictions")) {
        for (const auto& p : jr["predictions"]) {
          sp.predictions.push_back({field<int>(p, "epoch", where), field<int>(p, "truth", where),
                                    field<int>(p, "label", where), field<double>(p, "score", where)});
        }
      }
      s.splits.push_back(std::move(sp));
    }
    r.subjects.push_back(std::move(s));
  }
  r.summarize();
  return r;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string scores_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "subject,session,split,epoch,truth,predicted,score\n";
  for (const auto& s : report.subjects)
    for (const auto& r : s.splits)
      for (const auto& p : r.predictions)
        os << s.subject << ',' << r.session << ',' << r.split << ',' << p.epoch << ',' << p.truth
           << ',' << p.label << ',' << fmt(p.score) << '\n';
  return os.str();
}

std::string timing_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "subject,session,split,select_s,covariance_s,fit_s,predict_s,total_s\n";
  for (const auto& s : report.subjects)
    for (const auto& r : s.splits)
      os << s.subject << ',' << r.session << ',' << r.split << ',' << fmt(r.timing.select) << ','
         << fmt(r.timing.covariance) << ',' << fmt(r.timing.fit) << ',' << fmt(r.timing.predict)
         << ',' << fmt(r.timing.total()) << '\n';
  return os.str();
}

std::string grid_csv(const GridSearchResult& grid) {
  std::ostringstream os;
  os << "order,lag,param_id,mean_score,n_valid_folds\n";
  for (const auto& c : grid.cells) {
    os << c.order << ',' << c.lag << ',' << c.param_id << ',';
    if (c.valid) os << fmt(c.mean_score);
    else os << "nan";
    os << ',' << c.n_valid_folds << '\n';
  }
  return os.str();
}

TimingSummary summarize_timings(const std::vector<TimingProfile>& runs) {
  TimingSummary out;
  out.runs = static_cast<int>(runs.size());
  auto stage = [&](double TimingProfile::*member, double& mean, double& sd) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.*member);
    mean = mean_of(v);
    sd = sample_std(v);
  };
  stage(&TimingProfile::select, out.mean.select, out.std.select);
  stage(&TimingProfile::covariance, out.mean.covariance, out.std.covariance);
  stage(&TimingProfile::fit, out.mean.fit, out.std.fit);
  stage(&TimingProfile::predict, out.mean.predict, out.std.predict);
  return out;
}

// ---------------------------------------------------------------------------
// Meta-analysis

namespace {

struct Candidate {
  std::string label;
  const EvalReport* report;
};

// Subject name -> mean score, after checking both reports cover the same
// subjects with the same splits.
std::vector<std::pair<double, double>> paired_scores(const EvalReport& a, const EvalReport& b,
                                                     const std::string& dataset) {
  auto keyed = [](const EvalReport& r) {
    std::map<std::string, const SubjectResult*> m;
    for (const auto& s : r.subjects) m[s.subject] = &s;
    return m;
  };
  const auto ma = keyed(a), mb = keyed(b);
  auto splits = [](const SubjectResult& s) {
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& sp : s.splits) keys.insert({sp.session, sp.split});
    return keys;
  };
  std::vector<std::pair<double, double>> out;
  if (ma.size() != mb.size()) {
    fail(ErrorCode::PairingViolation, "dataset '" + dataset + "': reports cover different subjects");
  }
  for (const auto& [name, sa] : ma) {
    auto it = mb.find(name);
    if (it == mb.end()) {
      fail(ErrorCode::PairingViolation,
           "dataset '" + dataset + "': subject '" + name + "' missing from one report");
    }
    if (splits(*sa) != splits(*it->second)) {
      fail(ErrorCode::PairingViolation,
           "dataset '" + dataset + "': subject '" + name + "' has different splits");
    }
    out.push_back({sa->mean_score, it->second->mean_score});
  }
  return out;
}

// One-tailed p that the candidate beats the baseline on one dataset.
double dataset_p(const std::vector<double>& diffs, long n_perm, std::uint64_t seed,
                 std::string& test) {
  if (std::all_of(diffs.begin(), diffs.end(), [](double d) { return d == 0.0; })) {
    test = "none";
    return 0.5;
  }
  const auto nonzero = std::count_if(diffs.begin(), diffs.end(), [](double d) { return d != 0.0; });
  if (static_cast<int>(diffs.size()) >= kWilcoxonMinSubjects && nonzero >= 5) {
    test = "wilcoxon";
    return wilcoxon_signed_rank(diffs);
  }
  test = "permutation_t";
  if (std::all_of(diffs.begin(), diffs.end(), [&](double d) { return d == diffs[0]; })) {
    // The t statistic is undefined; the sign-flip null of the mean gives the
    // same answer as exhaustive enumeration.
    test = "permutation_mean";
    if (diffs[0] < 0) return 1.0;
    return std::max(std::ldexp(1.0, -static_cast<int>(diffs.size())), 1.0 / (n_perm + 1.0));
  }
  return permutation_paired_t(diffs, n_perm, seed);
}

}  // namespace

MetaAnalysis meta_analysis(const std::vector<EvalReport>& reports, long n_perm, std::uint64_t seed) {
  if (reports.size() < 2) fail(ErrorCode::InvalidArgument, "stats: need at least 2 reports");
  std::map<std::string, std::vector<Candidate>> by_dataset;
  for (const auto& r : reports) {
    auto& list = by_dataset[r.dataset];
    std::string label = r.pipeline + "[" + r.param_source + "]";
    int dup = 1;
    for (const auto& c : list)
      if (c.label.rfind(label, 0) == 0) ++dup;
    if (dup > 1) label += "#" + std::to_string(dup);
    list.push_back({label, &r});
  }
  const auto& first = by_dataset.begin()->second;
  if (first.size() < 2) {
    fail(ErrorCode::PairingViolation,
         "dataset '" + by_dataset.begin()->first + "' has a single report; nothing to compare");
  }
  for (const auto& [name, list] : by_dataset) {
    bool same = list.size() == first.size();
    for (std::size_t k = 0; same && k < list.size(); ++k) same = list[k].label == first[k].label;
    if (!same) {
      fail(ErrorCode::PairingViolation,
           "dataset '" + name + "' does not list the same pipelines in the same order as '" +
               by_dataset.begin()->first + "'");
    }
  }

  const std::size_t k = first.size();
  MetaAnalysis meta;
  meta.correction_factor = static_cast<int>(k * (k - 1));
  std::uint64_t h = 0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      HypothesisResult hyp;
      hyp.baseline = first[a].label;
      hyp.candidate = first[b].label;
      hyp.hypothesis = hyp.candidate + " > " + hyp.baseline;
      std::vector<double> pooled, ps, weights;
      std::uint64_t d = 0;
      for (const auto& [name, list] : by_dataset) {
        const auto pairs = paired_scores(*list[a].report, *list[b].report, name);
        std::vector<double> diffs;
        for (const auto& [sa, sb] : pairs) diffs.push_back(sb - sa);
        std::string test;
        const double p = dataset_p(diffs, n_perm, substream_key(seed, h, d++), test);
        hyp.p_raw[name] = p;
        hyp.test[name] = test;
        hyp.n_subjects[name] = static_cast<int>(diffs.size());
        ps.push_back(p);
        weights.push_back(std::sqrt(static_cast<double>(diffs.size())));
        pooled.insert(pooled.end(), diffs.begin(), diffs.end());
      }
      if (ps.size() == 1) {
        hyp.p_combined = ps[0];
      } else {
        // Exhaustive tests can return exactly 1; keep the quantile finite.
        for (double& p : ps) p = std::clamp(p, std::numeric_limits<double>::min(), 1.0 - 1e-12);
        hyp.p_combined = stouffer_combine(ps, weights);
      }
      hyp.p_corrected = bonferroni(hyp.p_combined, meta.correction_factor);
      hyp.smd = pooled.size() >= 2 ? paired_cohens_d(pooled) : 0.0;
      meta.hypotheses.push_back(std::move(hyp));
      ++h;
    }
  }
  return meta;
}

std::string meta_to_json(const MetaAnalysis& meta) {
  json j;
  j["format"] = "acm-meta-analysis";
  j["version"] = 1;
  j["correction"] = "bonferroni";
  j["correction_factor"] = meta.correction_factor;
  j["smd_kind"] = "cohens_d_paired";
  json hyps = json::array();
  for (const auto& h : meta.hypotheses) {
    json jh;
    jh["hypothesis"] = h.hypothesis;
    jh["baseline"] = h.baseline;
    jh["candidate"] = h.candidate;
    jh["p_raw"] = h.p_raw;
    jh["test"] = h.test;
    jh["n_subjects"] = h.n_subjects;
    jh["p_combined"] = h.p_combined;
    jh["p_corrected"] = h.p_corrected;
    if (std::isfinite(h.smd)) jh["smd"] = h.smd;
    else jh["smd"] = h.smd > 0 ? "inf" : "-inf";
    hyps.push_back(std::move(jh));
  }
  j["hypotheses"] = std::move(hyps);
  return j.dump(2) + "\n";
}

}  // namespace acm
