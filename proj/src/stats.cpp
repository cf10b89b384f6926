#include "acm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "acm/error.hpp"
#include "acm/random.hpp"

namespace acm {

double normal_upper_tail(double z) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z));
}

double normal_upper_quantile(double p) {
  return boost::math::quantile(
      boost::math::complement(boost::math::normal_distribution<double>(), p));
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) fail(ErrorCode::LengthMismatch, "auc_roc: length mismatch");
  auto positive = [&](std::size_t i) { return labels[i] != 0; };
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U from average ranks.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive(order[k])) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorCode::OneClassOnly, "auc_roc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) fail(ErrorCode::LengthMismatch, "accuracy: length mismatch");
  if (truth.empty()) fail(ErrorCode::EmptyInput, "accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double wilcoxon_signed_rank(std::span<const double> diffs, WilcoxonMode mode) {
  std::vector<double> nz;
  for (double d : diffs) {
    if (!std::isfinite(d)) fail(ErrorCode::InvalidArgument, "wilcoxon: non-finite difference");
    if (d != 0.0) nz.push_back(d);
  }
  if (nz.empty()) fail(ErrorCode::AllZeroDiffs, "wilcoxon: every paired difference is zero");
  const std::size_t n = nz.size();
  if (n < 5) fail(ErrorCode::TooFewSamples, "wilcoxon: need at least 5 non-zero differences");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(nz[a]) < std::abs(nz[b]); });
  std::vector<double> rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && std::abs(nz[order[j]]) == std::abs(nz[order[i]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (nz[i] > 0) w_plus += rank[i];

  const bool exact = mode == WilcoxonMode::Exact || (mode == WilcoxonMode::Auto && n <= 12);
  if (exact) {
    if (n > 25) fail(ErrorCode::InvalidArgument, "wilcoxon: exact mode limited to n <= 25");
    const std::uint64_t patterns = 1ULL << n;
    std::uint64_t hits = 0;
    const double eps = 1e-9 * (static_cast<double>(n) * (n + 1));
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      double w = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1ULL) w += rank[i];
      if (w >= w_plus - eps) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(patterns);
  }
  const double dn = static_cast<double>(n);
  const double mean = dn * (dn + 1.0) / 4.0;
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
  if (!(var > 0.0)) return w_plus > mean ? 0.0 : 1.0;
  const double z = (w_plus - mean - 0.5) / std::sqrt(var);
  return normal_upper_tail(z);
}

namespace {

// t statistic of the sign-flipped sample; +-inf when the flipped sample has
// zero spread but a non-zero mean.
double flipped_t(std::span<const double> d, const std::vector<double>& sign) {
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) mean += sign[i] * d[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double e = sign[i] * d[i] - mean;
    ss += e * e;
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    if (mean == 0.0) return 0.0;
    return mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return mean / (sd / std::sqrt(n));
}

}  // namespace

double permutation_paired_t(std::span<const double> diffs, long n_perm, std::uint64_t seed) {
  const std::size_t n = diffs.size();
  if (n < 3) fail(ErrorCode::TooFewSamples, "permutation_paired_t: need at least 3 pairs");
  if (n_perm < 1) fail(ErrorCode::InvalidArgument, "permutation_paired_t: n_perm must be >= 1");
  for (double d : diffs)
    if (!std::isfinite(d)) fail(ErrorCode::InvalidArgument, "permutation_paired_t: non-finite difference");
  if (std::all_of(diffs.begin(), diffs.end(), [&](double d) { return d == diffs[0]; })) {
    fail(ErrorCode::DegenerateVariance, "permutation_paired_t: all differences are equal");
  }
  std::vector<double> sign(n, 1.0);
  const double observed = flipped_t(diffs, sign);
  const double eps = 1e-12 * std::max(1.0, std::abs(observed));
  auto at_least = [&](double t) { return t >= observed - eps; };

  if (n < 63 && (1ULL << n) <= static_cast<std::uint64_t>(n_perm)) {
    const std::uint64_t patterns = 1ULL << n;
    std::uint64_t hits = 0;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      for (std::size_t i = 0; i < n; ++i) sign[i] = (mask >> i & 1ULL) ? -1.0 : 1.0;
      hits += at_least(flipped_t(diffs, sign));
    }
    return static_cast<double>(hits) / static_cast<double>(patterns);
  }
  Rng rng(seed);
  long hits = 0;
  for (long k = 0; k < n_perm; ++k) {
    for (std::size_t i = 0; i < n; ++i) sign[i] = (rng.engine()() >> 63) ? -1.0 : 1.0;
    hits += at_least(flipped_t(diffs, sign));
  }
  return static_cast<double>(1 + hits) / static_cast<double>(n_perm + 1);
}

double stouffer_combine(std::span<const double> p_values, std::span<const double> weights) {
  if (p_values.empty()) fail(ErrorCode::EmptyInput, "stouffer_combine: no p-values");
  if (!weights.empty() && weights.size() != p_values.size()) {
    fail(ErrorCode::LengthMismatch, "stouffer_combine: weight count differs from p-value count");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    const double p = p_values[i];
    if (!(p > 0.0 && p < 1.0)) {
      std::ostringstream os;
      os << "stouffer_combine: p-value " << p << " must lie strictly inside (0, 1)";
      fail(ErrorCode::DegeneratePValue, os.str());
    }
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w > 0.0)) fail(ErrorCode::InvalidArgument, "stouffer_combine: weights must be positive");
    num += w * normal_upper_quantile(p);
    den += w * w;
  }
  if (p_values.size() == 1) return p_values[0];
  return normal_upper_tail(num / std::sqrt(den));
}

double bonferroni(double p, int m) {
  if (m < 1) fail(ErrorCode::InvalidArgument, "bonferroni: m must be >= 1");
  return std::min(1.0, static_cast<double>(m) * p);
}

double paired_cohens_d(std::span<const double> diffs) {
  if (diffs.size() < 2) fail(ErrorCode::TooFewSamples, "paired_cohens_d: need at least 2 pairs");
  const double n = static_cast<double>(diffs.size());
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (mean == 0.0) return 0.0;
  if (sd == 0.0) return mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  return mean / sd;
}

}  // namespace acm
