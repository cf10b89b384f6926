/* C interface to the augmented covariance library.
 *
 * Every function returns an acm_status. On failure the message of the most
 * recent error on the calling thread is available from acm_last_error().
 * Strings handed out through char** parameters are owned by the caller and
 * released with acm_string_free(). Handles are released with their _free
 * function; passing NULL to any _free function is a no-op.
 */
#ifndef ACM_ACM_H
#define ACM_ACM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ACM_API __declspec(dllexport)
#else
#define ACM_API __attribute__((visibility("default")))
#endif

typedef enum acm_status {
  ACM_OK = 0,
  ACM_E_INVALID_ARGUMENT = 1,
  ACM_E_DIMENSION_MISMATCH = 2,
  ACM_E_NOT_SYMMETRIC = 3,
  ACM_E_NON_POSITIVE_EIGENVALUE = 4,
  ACM_E_NOT_SPD = 5,
  ACM_E_NO_CONVERGENCE = 6,
  ACM_E_EMPTY_INPUT = 7,
  ACM_E_INVALID_EPOCH = 8,
  ACM_E_LAG_TOO_LARGE = 9,
  ACM_E_INCONSISTENT_INPUT = 10,
  ACM_E_SINGULAR_SYSTEM = 11,
  ACM_E_CONSTANT_SERIES = 12,
  ACM_E_TOO_SHORT = 13,
  ACM_E_EMPTY_CLASS = 14,
  ACM_E_SOLVER_STALL = 15,
  ACM_E_ALL_CELLS_INVALID = 16,
  ACM_E_TOO_FEW_SAMPLES = 17,
  ACM_E_SINGLE_SESSION = 18,
  ACM_E_ONE_CLASS_ONLY = 19,
  ACM_E_LENGTH_MISMATCH = 20,
  ACM_E_ALL_ZERO_DIFFS = 21,
  ACM_E_DEGENERATE_VARIANCE = 22,
  ACM_E_DEGENERATE_P_VALUE = 23,
  ACM_E_PAIRING_VIOLATION = 24,
  ACM_E_INVALID_BAND = 25,
  ACM_E_UNSTABLE_SPEC = 26,
  ACM_E_FORMAT_ERROR = 27,
  ACM_E_VERSION_UNSUPPORTED = 28,
  ACM_E_IO_ERROR = 29,
  ACM_E_INTERNAL = 100
} acm_status;

ACM_API const char* acm_version(void);

/* Error name such as "NotSPD" for a status. */
ACM_API const char* acm_status_name(acm_status status);
/* Message of the last failure on this thread ("" when none). */
ACM_API const char* acm_last_error(void);
/* Process exit code for a status: 0 success, 2 input or configuration
 * error, 3 numerical failure. */
ACM_API int acm_exit_code(acm_status status);

ACM_API void acm_string_free(char* s);

/* ---- Epoch sets -------------------------------------------------------- */

typedef struct acm_epochset acm_epochset;

ACM_API acm_status acm_epochset_read(const char* path, acm_epochset** out);
ACM_API acm_status acm_epochset_write(const acm_epochset* set, const char* path);
ACM_API void acm_epochset_free(acm_epochset* set);

/* Simulates a dataset from a JSON request whose "kind" is "ar",
 * "equal_lag0" or "sine". */
ACM_API acm_status acm_simulate(const char* spec_json, unsigned workers, acm_epochset** out);

/* {"subject","classes","sample_rate","channels","samples","sessions":[...]} */
ACM_API acm_status acm_epochset_summary(const acm_epochset* set, char** out_json);

/* Channel rows, sample columns. */
ACM_API acm_status acm_epochset_epoch_csv(const acm_epochset* set, size_t session, size_t epoch,
                                          char** out_csv);

/* Zero-phase Butterworth band-pass of every epoch, in place. */
ACM_API acm_status acm_epochset_bandpass(acm_epochset* set, double low_hz, double high_hz);

/* ---- Embedding parameter estimation ----------------------------------- */

typedef struct acm_estimate acm_estimate;

/* method: "ami_cao" or "mdop". options_json may be NULL; recognised keys
 * are "max_lag", "bins", "max_dim", "threshold", "max_cycles",
 * "fnn_threshold", "theiler". Uses every epoch of every set. */
ACM_API acm_status acm_estimate_params(const acm_epochset* const* sets, size_t n_sets,
                                       const char* method, const char* options_json,
                                       acm_estimate** out);
ACM_API void acm_estimate_free(acm_estimate* est);
/* {"tau","D","method","flagged","flag"} */
ACM_API acm_status acm_estimate_json(const acm_estimate* est, char** out_json);
ACM_API size_t acm_estimate_curve_count(const acm_estimate* est);
/* Diagnostic curve i as CSV together with a short file-friendly name. */
ACM_API acm_status acm_estimate_curve(const acm_estimate* est, size_t i, char** out_name,
                                      char** out_csv);

/* ---- Evaluation ------------------------------------------------------- */

typedef struct acm_eval_result acm_eval_result;

/* config_json keys: "pipeline" (MDM, ACM+MDM, TANG+SVM, ACM+TANG+SVM),
 * "param_source" (fixed, grid, ami_cao, mdop), "order", "lag",
 * "eval" (ws, cs), "folds", "seed" (required), "grid_max_order",
 * "grid_max_lag", "inner_folds", "dataset". Each set is one subject. */
ACM_API acm_status acm_evaluate(const acm_epochset* const* sets, size_t n_sets,
                                const char* config_json, unsigned workers,
                                acm_eval_result** out);
ACM_API void acm_eval_result_free(acm_eval_result* result);

/* Canonical report JSON; identical for identical inputs and seed. */
ACM_API acm_status acm_eval_report_json(const acm_eval_result* result, char** out_json);
ACM_API acm_status acm_eval_scores_csv(const acm_eval_result* result, char** out_csv);
ACM_API acm_status acm_eval_timing_csv(const acm_eval_result* result, char** out_csv);
/* Mean and standard deviation of the report, for quick display. */
ACM_API acm_status acm_eval_summary(const acm_eval_result* result, double* mean, double* std);
ACM_API size_t acm_eval_grid_count(const acm_eval_result* result);
/* Score map of grid search i as "order,lag,param_id,mean_score,n_valid_folds"
 * CSV, named "<subject>_<session>_<split>". */
ACM_API acm_status acm_eval_grid(const acm_eval_result* result, size_t i, char** out_name,
                                 char** out_csv);

/* ---- Statistics ------------------------------------------------------- */

/* Meta-analysis over report JSON documents (see acm_eval_report_json). */
ACM_API acm_status acm_stats(const char* const* report_jsons, size_t n_reports, long n_perm,
                             uint64_t seed, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* ACM_ACM_H */
