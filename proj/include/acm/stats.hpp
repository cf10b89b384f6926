#pragma once

#include <cstdint>
#include <span>

namespace acm {

// Probability that a positive outranks a negative, ties counting one half.
// Non-zero labels mark the positive class.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

enum class WilcoxonMode { Auto, Exact, Normal };

// One-tailed (greater) signed-rank test on paired differences. Zero
// differences are dropped; tied magnitudes get average ranks. Auto uses
// exact enumeration of sign patterns for n <= 12 and the tie-corrected
// normal approximation with continuity correction above.
double wilcoxon_signed_rank(std::span<const double> diffs, WilcoxonMode mode = WilcoxonMode::Auto);

// One-tailed sign-flip permutation test of the paired t statistic.
// Exhaustive over all 2^n flips when 2^n <= n_perm (p = share of flips with
// t >= observed); otherwise n_perm seeded random flips with
// p = (1 + hits) / (n_perm + 1).
double permutation_paired_t(std::span<const double> diffs, long n_perm = 10000,
                            std::uint64_t seed = 0);

// Weighted Stouffer combination of one-tailed p-values. Empty weights means
// equal weights.
double stouffer_combine(std::span<const double> p_values, std::span<const double> weights = {});

double bonferroni(double p, int m);

// Mean over standard deviation of paired differences (Cohen's d for paired
// samples); 0 when every difference is zero.
double paired_cohens_d(std::span<const double> diffs);

// Upper-tail standard normal helpers.
double normal_upper_tail(double z);
double normal_upper_quantile(double p);

}  // namespace acm
