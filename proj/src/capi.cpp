#include "acm/acm.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "acm/data_io.hpp"
#include "acm/embedding.hpp"
#include "acm/error.hpp"
#include "acm/eval.hpp"
#include "acm/spec_io.hpp"

struct acm_epochset {
  acm::EpochSet set;
};

struct acm_estimate {
  acm::EmbeddingEstimate estimate;
  std::vector<std::pair<std::string, std::string>> curves;
};

struct acm_eval_result {
  acm::EvalReport report;
  std::vector<std::pair<std::string, std::string>> grids;
};

namespace {

using json = nlohmann::json;

thread_local std::string g_last_error;

acm_status to_status(acm::ErrorCode code) {
  return static_cast<acm_status>(static_cast<int>(code) + 1);
}

// Runs `body`, translating exceptions into status codes and the thread-local
// message.
template <typename Body>
acm_status guarded(Body&& body) {
  try {
    body();
    g_last_error.clear();
    return ACM_OK;
  } catch (const acm::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return ACM_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ACM_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return ACM_E_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) acm::fail(acm::ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

json parse_object(const char* text, const char* what) {
  if (!text || !*text) return json::object();
  try {
    json j = json::parse(text);
    if (!j.is_object()) acm::fail(acm::ErrorCode::InvalidArgument, std::string(what) + " must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    acm::fail(acm::ErrorCode::InvalidArgument, std::string(what) + " is not valid JSON: " + e.what());
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const char* what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    acm::fail(acm::ErrorCode::InvalidArgument,
              std::string(what) + ": '" + key + "' has the wrong type");
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      acm::fail(acm::ErrorCode::InvalidArgument, std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

std::string file_safe(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

std::vector<const acm::EpochSet*> collect(const acm_epochset* const* sets, size_t n) {
  if (n == 0) acm::fail(acm::ErrorCode::EmptyInput, "no epoch sets given");
  require(sets, "sets");
  std::vector<const acm::EpochSet*> out;
  for (size_t i = 0; i < n; ++i) {
    require(sets[i], "epoch set");
    out.push_back(&sets[i]->set);
  }
  return out;
}

}  // namespace

extern "C" {

const char* acm_version(void) { return "1.0.0"; }

const char* acm_status_name(acm_status status) {
  if (status == ACM_OK) return "OK";
  if (status == ACM_E_INTERNAL) return "Internal";
  const int idx = static_cast<int>(status) - 1;
  if (idx < 0 || idx > static_cast<int>(acm::ErrorCode::IoError)) return "Unknown";
  return acm::error_code_name(static_cast<acm::ErrorCode>(idx));
}

const char* acm_last_error(void) { return g_last_error.c_str(); }

int acm_exit_code(acm_status status) {
  if (status == ACM_OK) return 0;
  if (status == ACM_E_INTERNAL) return 3;
  const int idx = static_cast<int>(status) - 1;
  if (idx < 0 || idx > static_cast<int>(acm::ErrorCode::IoError)) return 2;
  return acm::is_numerical(static_cast<acm::ErrorCode>(idx)) ? 3 : 2;
}

void acm_string_free(char* s) { std::free(s); }

// ---- Epoch sets -----------------------------------------------------------

acm_status acm_epochset_read(const char* path, acm_epochset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto h = std::make_unique<acm_epochset>();
    h->set = acm::read_epochset(std::string(path));
    *out = h.release();
  });
}

acm_status acm_epochset_write(const acm_epochset* set, const char* path) {
  return guarded([&] {
    require(set, "set");
    require(path, "path");
    acm::write_epochset(set->set, std::string(path));
  });
}

void acm_epochset_free(acm_epochset* set) { delete set; }

acm_status acm_simulate(const char* spec_json, unsigned workers, acm_epochset** out) {
  return guarded([&] {
    require(spec_json, "spec_json");
    require(out, "out");
    *out = nullptr;
    auto h = std::make_unique<acm_epochset>();
    h->set = acm::simulate_from_json(spec_json, workers);
    *out = h.release();
  });
}

acm_status acm_epochset_summary(const acm_epochset* set, char** out_json) {
  return guarded([&] {
    require(set, "set");
    require(out_json, "out_json");
    const acm::EpochSet& s = set->set;
    json j;
    j["subject"] = s.subject;
    j["classes"] = s.classes;
    j["sample_rate"] = s.sample_rate;
    j["channels"] = s.channels();
    j["samples"] = s.samples();
    j["total_epochs"] = s.total_epochs();
    json sessions = json::array();
    for (const auto& sess : s.sessions) {
      std::vector<int> counts(s.classes.size(), 0);
      for (int l : sess.labels) ++counts[static_cast<std::size_t>(l)];
      sessions.push_back({{"id", sess.id}, {"n_epochs", sess.epochs.size()}, {"per_class", counts}});
    }
    j["sessions"] = std::move(sessions);
    *out_json = dup_string(j.dump(2) + "\n");
  });
}

acm_status acm_epochset_epoch_csv(const acm_epochset* set, size_t session, size_t epoch,
                                  char** out_csv) {
  return guarded([&] {
    require(set, "set");
    require(out_csv, "out_csv");
    const auto& sessions = set->set.sessions;
    if (session >= sessions.size() || epoch >= sessions[session].epochs.size()) {
      acm::fail(acm::ErrorCode::InvalidArgument, "epoch index out of range");
    }
    *out_csv = dup_string(acm::epoch_to_csv(sessions[session].epochs[epoch]));
  });
}

acm_status acm_epochset_bandpass(acm_epochset* set, double low_hz, double high_hz) {
  return guarded([&] {
    require(set, "set");
    acm::EpochSet filtered = set->set;
    for (auto& sess : filtered.sessions)
      for (auto& e : sess.epochs) e = acm::bandpass(e, low_hz, high_hz);
    set->set = std::move(filtered);
  });
}

// ---- Estimation -----------------------------------------------------------

acm_status acm_estimate_params(const acm_epochset* const* sets, size_t n_sets, const char* method,
                               const char* options_json, acm_estimate** out) {
  return guarded([&] {
    require(method, "method");
    require(out, "out");
    *out = nullptr;
    const auto list = collect(sets, n_sets);
    acm::EpochRefs refs;
    for (const auto* s : list) {
      s->validate();
      const auto r = acm::all_epochs(*s);
      refs.insert(refs.end(), r.begin(), r.end());
    }
    const json opts = parse_object(options_json, "estimate options");
    auto h = std::make_unique<acm_estimate>();
    const std::string m = method;
    if (m == "ami_cao") {
      check_keys(opts, {"max_lag", "bins", "max_dim", "threshold", "theiler"}, "ami_cao options");
      acm::AmiCaoOptions o;
      read(opts, "max_lag", o.max_lag, "ami_cao options");
      read(opts, "bins", o.bins, "ami_cao options");
      read(opts, "max_dim", o.cao.max_dim, "ami_cao options");
      read(opts, "threshold", o.cao.threshold, "ami_cao options");
      read(opts, "theiler", o.cao.theiler, "ami_cao options");
      h->estimate = acm::ami_cao(refs, o);
    } else if (m == "mdop") {
      check_keys(opts, {"max_lag", "max_cycles", "fnn_threshold", "theiler", "fnn_ratio"},
                 "mdop options");
      acm::MdopOptions o;
      read(opts, "max_lag", o.max_lag, "mdop options");
      read(opts, "max_cycles", o.max_cycles, "mdop options");
      read(opts, "fnn_threshold", o.fnn_threshold, "mdop options");
      read(opts, "theiler", o.theiler, "mdop options");
      read(opts, "fnn_ratio", o.fnn_ratio, "mdop options");
      h->estimate = acm::mdop_unified(refs, o);
    } else {
      acm::fail(acm::ErrorCode::InvalidArgument,
                "unknown estimation method '" + m + "' (expected ami_cao or mdop)");
    }
    const auto& e = h->estimate;
    if (!e.ami_curve.empty()) h->curves.push_back({"ami", acm::curve_to_csv(e.ami_curve, 0, "lag")});
    if (!e.e1_curve.empty()) h->curves.push_back({"cao_e1", acm::curve_to_csv(e.e1_curve, 1, "dim")});
    if (!e.cycles.empty()) {
      std::vector<double> fnn;
      for (std::size_t c = 0; c < e.cycles.size(); ++c) {
        h->curves.push_back({"mdop_beta_cycle" + std::to_string(c + 1),
                             acm::curve_to_csv(e.cycles[c].beta, 1, "lag")});
        fnn.push_back(e.cycles[c].fnn);
      }
      h->curves.push_back({"mdop_fnn", acm::curve_to_csv(fnn, 1, "cycle")});
    }
    *out = h.release();
  });
}

void acm_estimate_free(acm_estimate* est) { delete est; }

acm_status acm_estimate_json(const acm_estimate* est, char** out_json) {
  return guarded([&] {
    require(est, "est");
    require(out_json, "out_json");
    const auto& e = est->estimate;
    json j;
    j["tau"] = e.tau;
    j["D"] = e.dimension;
    j["method"] = e.method;
    j["flagged"] = e.flagged;
    j["flag"] = e.flag;
    if (!e.cycles.empty()) {
      json lags = json::array();
      for (const auto& c : e.cycles) lags.push_back(c.lag);
      j["mdop_lags"] = std::move(lags);
    }
    *out_json = dup_string(j.dump(2) + "\n");
  });
}

size_t acm_estimate_curve_count(const acm_estimate* est) { return est ? est->curves.size() : 0; }

acm_status acm_estimate_curve(const acm_estimate* est, size_t i, char** out_name, char** out_csv) {
  return guarded([&] {
    require(est, "est");
    require(out_name, "out_name");
    require(out_csv, "out_csv");
    if (i >= est->curves.size()) acm::fail(acm::ErrorCode::InvalidArgument, "curve index out of range");
    *out_name = dup_string(est->curves[i].first);
    *out_csv = dup_string(est->curves[i].second);
  });
}

// ---- Evaluation -----------------------------------------------------------

acm_status acm_evaluate(const acm_epochset* const* sets, size_t n_sets, const char* config_json,
                        unsigned workers, acm_eval_result** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const auto list = collect(sets, n_sets);
    const json cfg = parse_object(config_json, "evaluation config");
    const char* what = "evaluation config";
    check_keys(cfg, {"pipeline", "param_source", "order", "lag", "eval", "folds", "seed",
                     "grid_max_order", "grid_max_lag", "inner_folds", "dataset"},
               what);
    if (!cfg.contains("seed")) acm::fail(acm::ErrorCode::InvalidArgument, "evaluation config: 'seed' is required");
    std::string pipeline = "ACM+MDM", source = "grid", mode = "ws", dataset;
    int order = 1, lag = 1, folds = 5, max_order = 10, max_lag = 10;
    std::uint64_t seed = 0;
    acm::PipelineConfig config;
    read(cfg, "pipeline", pipeline, what);
    read(cfg, "param_source", source, what);
    read(cfg, "order", order, what);
    read(cfg, "lag", lag, what);
    read(cfg, "eval", mode, what);
    read(cfg, "folds", folds, what);
    read(cfg, "seed", seed, what);
    read(cfg, "grid_max_order", max_order, what);
    read(cfg, "grid_max_lag", max_lag, what);
    read(cfg, "inner_folds", config.inner_folds, what);
    read(cfg, "dataset", dataset, what);
    if (max_order < 1 || max_lag < 1) {
      acm::fail(acm::ErrorCode::InvalidArgument, "grid maxima must be >= 1");
    }
    config.kind = acm::parse_pipeline(pipeline);
    config.source = acm::parse_param_source(source);
    config.fixed = {order, lag};
    config.grid_orders.clear();
    config.grid_lags.clear();
    for (int o = 1; o <= max_order; ++o) config.grid_orders.push_back(o);
    for (int l = 1; l <= max_lag; ++l) config.grid_lags.push_back(l);
    const acm::EvalMode eval_mode = acm::parse_eval_mode(mode);

    std::vector<acm::EpochSet> subjects;
    for (const auto* s : list) subjects.push_back(*s);
    auto h = std::make_unique<acm_eval_result>();
    h->report = eval_mode == acm::EvalMode::WithinSession
                    ? acm::within_session_eval(subjects, config, folds, seed, workers)
                    : acm::cross_session_eval(subjects, config, seed, workers);
    h->report.dataset = dataset.empty() ? subjects.front().subject : dataset;
    for (const auto& s : h->report.subjects)
      for (const auto& r : s.splits)
        if (r.grid) {
          h->grids.push_back({file_safe(s.subject) + "_" + file_safe(r.session) + "_" + file_safe(r.split),
                              acm::grid_csv(*r.grid)});
        }
    *out = h.release();
  });
}

void acm_eval_result_free(acm_eval_result* result) { delete result; }

acm_status acm_eval_report_json(const acm_eval_result* result, char** out_json) {
  return guarded([&] {
    require(result, "result");
    require(out_json, "out_json");
    *out_json = dup_string(acm::report_to_json(result->report));
  });
}

acm_status acm_eval_scores_csv(const acm_eval_result* result, char** out_csv) {
  return guarded([&] {
    require(result, "result");
    require(out_csv, "out_csv");
    *out_csv = dup_string(acm::scores_csv(result->report));
  });
}

acm_status acm_eval_timing_csv(const acm_eval_result* result, char** out_csv) {
  return guarded([&] {
    require(result, "result");
    require(out_csv, "out_csv");
    *out_csv = dup_string(acm::timing_csv(result->report));
  });
}

acm_status acm_eval_summary(const acm_eval_result* result, double* mean, double* std) {
  return guarded([&] {
    require(result, "result");
    if (mean) *mean = result->report.mean;
    if (std) *std = result->report.std;
  });
}

size_t acm_eval_grid_count(const acm_eval_result* result) { return result ? result->grids.size() : 0; }

acm_status acm_eval_grid(const acm_eval_result* result, size_t i, char** out_name, char** out_csv) {
  return guarded([&] {
    require(result, "result");
    require(out_name, "out_name");
    require(out_csv, "out_csv");
    if (i >= result->grids.size()) acm::fail(acm::ErrorCode::InvalidArgument, "grid index out of range");
    *out_name = dup_string(result->grids[i].first);
    *out_csv = dup_string(result->grids[i].second);
  });
}

// ---- Statistics -----------------------------------------------------------

acm_status acm_stats(const char* const* report_jsons, size_t n_reports, long n_perm, uint64_t seed,
                     char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    if (n_reports > 0) require(report_jsons, "report_jsons");
    std::vector<acm::EvalReport> reports;
    for (size_t i = 0; i < n_reports; ++i) {
      require(report_jsons[i], "report");
      reports.push_back(acm::report_from_json(report_jsons[i]));
    }
    *out_json = dup_string(acm::meta_to_json(acm::meta_analysis(reports, n_perm, seed)));
  });
}

}  // extern "C"
