#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "acm/error.hpp"
#include "acm/stats.hpp"

using namespace acm;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an acm::Error");
  return ErrorCode::InvalidArgument;
}

double upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// Midranks of |d| for the nonzero diffs, computed by counting.
std::vector<double> abs_ranks(const std::vector<double>& d) {
  std::vector<double> r(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    double below = 0.0, same = 0.0;
    for (double v : d) {
      if (std::abs(v) < std::abs(d[i])) below += 1.0;
      if (std::abs(v) == std::abs(d[i])) same += 1.0;
    }
    r[i] = below + (same + 1.0) / 2.0;
  }
  return r;
}

std::vector<double> nonzero(const std::vector<double>& d) {
  std::vector<double> out;
  for (double v : d)
    if (v != 0.0) out.push_back(v);
  return out;
}

// Share of the 2^n sign patterns whose positive-rank sum reaches the observed.
double wilcoxon_exact_oracle(const std::vector<double>& diffs) {
  const auto d = nonzero(diffs);
  const auto r = abs_ranks(d);
  double w = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0) w += r[i];
  const std::size_t n = d.size();
  double hits = 0.0;
  for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1UL) s += r[i];
    if (s >= w - 1e-9) hits += 1.0;
  }
  return hits / static_cast<double>(1UL << n);
}

double wilcoxon_normal_oracle(const std::vector<double>& diffs) {
  const auto d = nonzero(diffs);
  const auto r = abs_ranks(d);
  const double n = static_cast<double>(d.size());
  double w = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0) w += r[i];
  double var = n * (n + 1) * (2 * n + 1) / 24.0;
  // Tie correction from group sizes.
  std::vector<double> mags;
  for (double v : d) mags.push_back(std::abs(v));
  std::sort(mags.begin(), mags.end());
  for (std::size_t i = 0; i < mags.size();) {
    std::size_t j = i;
    while (j < mags.size() && mags[j] == mags[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  const double z = (w - n * (n + 1) / 4.0 - 0.5) / std::sqrt(var);
  return upper_tail(z);
}

double t_stat(const std::vector<double>& d) {
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1));
  return mean / (sd / std::sqrt(n));
}

double permutation_exhaustive_oracle(const std::vector<double>& d) {
  const double observed = t_stat(d);
  const std::size_t n = d.size();
  double hits = 0.0;
  for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
    std::vector<double> f = d;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1UL) f[i] = -f[i];
    const double t = t_stat(f);
    if (t >= observed - 1e-12 * std::max(1.0, std::abs(observed))) hits += 1.0;
  }
  return hits / static_cast<double>(1UL << n);
}

}  // namespace

TEST_CASE("auc examples") {
  std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  std::vector<int> y{0, 0, 1, 1};
  CHECK(auc_roc(s, y) == 1.0);
  std::vector<double> flat(4, 0.3);
  CHECK(auc_roc(flat, y) == 0.5);
  std::vector<int> one(4, 1);
  CHECK(code_of([&] { auc_roc(s, one); }) == ErrorCode::OneClassOnly);
  std::vector<int> short_y{0, 1};
  CHECK(code_of([&] { auc_roc(s, short_y); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("auc matches pairwise counting and its complement") {
  std::mt19937_64 rng(40);
  std::uniform_int_distribution<int> coin(0, 1), level(0, 9);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> s(50);
    std::vector<int> y(50);
    for (int i = 0; i < 50; ++i) {
      y[i] = i < 2 ? i : coin(rng);
      s[i] = k % 2 ? level(rng) / 3.0 : testing::gaussian(rng, 1, 1)(0, 0) + 0.5 * y[i];
    }
    const double a = auc_roc(s, y);
    CHECK(std::abs(a - testing::auc_oracle(s, y)) < 1e-12);
    std::vector<double> neg(s);
    for (double& v : neg) v = -v;
    CHECK(std::abs(a + auc_roc(neg, y) - 1.0) < 1e-12);
  }
}

TEST_CASE("accuracy") {
  std::vector<int> t{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  CHECK(accuracy(t, t) == 1.0);
  std::vector<int> wrong(t);
  for (int& v : wrong) v = (v + 1) % 3;
  CHECK(accuracy(wrong, t) == 0.0);
  std::vector<int> half(t);
  for (int i = 0; i < 5; ++i) half[i] = (half[i] + 1) % 3;
  CHECK(accuracy(half, t) == 0.5);
  std::vector<int> shorter{0};
  CHECK(code_of([&] { accuracy(shorter, t); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("wilcoxon examples") {
  std::vector<double> pos{0.1, 0.4, 0.2, 0.3, 0.6, 0.5};
  CHECK(wilcoxon_signed_rank(pos, WilcoxonMode::Exact) == doctest::Approx(1.0 / 64).epsilon(1e-14));
  std::vector<double> sym{0.1, -0.1, 0.2, -0.2, 0.3, -0.3};
  CHECK(wilcoxon_signed_rank(sym, WilcoxonMode::Exact) >= 0.5);
  CHECK(wilcoxon_signed_rank(sym, WilcoxonMode::Normal) >= 0.5);
  std::vector<double> zeros(8, 0.0);
  CHECK(code_of([&] { wilcoxon_signed_rank(zeros); }) == ErrorCode::AllZeroDiffs);
  std::vector<double> few{0.1, 0.2, 0.0, 0.3, -0.1};
  CHECK(code_of([&] { wilcoxon_signed_rank(few); }) == ErrorCode::TooFewSamples);
}

TEST_CASE("wilcoxon against enumeration and the normal formula") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> level(-6, 8);
  for (int k = 0; k < 40; ++k) {
    const std::size_t n = 5 + k % 12;
    std::vector<double> d(n);
    // Coarse levels produce tied magnitudes and zeros.
    for (auto& v : d) v = k % 2 ? level(rng) * 0.25 : testing::gaussian(rng, 1, 1)(0, 0) + 0.2;
    if (nonzero(d).size() < 5) continue;
    CHECK(std::abs(wilcoxon_signed_rank(d, WilcoxonMode::Exact) - wilcoxon_exact_oracle(d)) < 1e-12);
    CHECK(std::abs(wilcoxon_signed_rank(d, WilcoxonMode::Normal) - wilcoxon_normal_oracle(d)) < 1e-12);
    const double autop = wilcoxon_signed_rank(d);
    CHECK(autop == (nonzero(d).size() <= 12 ? wilcoxon_signed_rank(d, WilcoxonMode::Exact)
                                            : wilcoxon_signed_rank(d, WilcoxonMode::Normal)));
  }
}

TEST_CASE("wilcoxon exact and normal agree at the switch point") {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 30; ++k) {
    std::vector<double> d(12);
    for (auto& v : d) v = testing::gaussian(rng, 1, 1)(0, 0) + 0.3;
    const double e = wilcoxon_signed_rank(d, WilcoxonMode::Exact);
    const double a = wilcoxon_signed_rank(d, WilcoxonMode::Normal);
    CHECK(std::abs(e - a) < 0.02);
  }
}

TEST_CASE("wilcoxon is calibrated under the null") {
  std::mt19937_64 rng(43);
  int rejections = 0;
  const int runs = 200;
  for (int k = 0; k < runs; ++k) {
    std::vector<double> d(25);
    for (auto& v : d) v = testing::gaussian(rng, 1, 1)(0, 0);
    if (wilcoxon_signed_rank(d) < 0.05) ++rejections;
  }
  CHECK(rejections <= 0.07 * runs);
}

TEST_CASE("permutation paired t examples") {
  std::vector<double> four{0.1, 0.3, 0.2, 0.4};
  CHECK(permutation_paired_t(four) == doctest::Approx(1.0 / 16).epsilon(1e-14));
  CHECK(permutation_paired_t(four, 10000, 1) == permutation_paired_t(four, 10000, 99));

  std::vector<double> sym{-0.3, -0.1, 0.1, 0.3, -0.2, 0.2};
  const double p = permutation_paired_t(sym);
  CHECK(p > 0.45);
  CHECK(p < 0.6);

  std::vector<double> equal{0.2, 0.2, 0.2};
  CHECK(code_of([&] { permutation_paired_t(equal); }) == ErrorCode::DegenerateVariance);
  std::vector<double> two{0.1, 0.2};
  CHECK(code_of([&] { permutation_paired_t(two); }) == ErrorCode::TooFewSamples);
}

TEST_CASE("permutation paired t against enumeration and sampling") {
  std::mt19937_64 rng(44);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> d(3 + k % 9);
    for (auto& v : d) v = testing::gaussian(rng, 1, 1)(0, 0) + 0.4;
    const double p = permutation_paired_t(d, 1L << 12, 5);
    CHECK(std::abs(p - permutation_exhaustive_oracle(d)) < 1e-12);
  }
  for (int k = 0; k < 5; ++k) {
    std::vector<double> d(30);
    for (auto& v : d) v = testing::gaussian(rng, 1, 1)(0, 0) + 0.1;
    const double a = permutation_paired_t(d, 2000, 7);
    CHECK(a == permutation_paired_t(d, 2000, 7));
    CHECK(a > 0.0);
    CHECK(a <= 1.0);
    // Smallest attainable value of the smoothed estimator.
    CHECK(a >= 1.0 / 2001.0);
    // Large-sample t reference.
    const double ref = upper_tail(t_stat(d));
    CHECK(std::abs(a - ref) < 0.06);
  }
}

TEST_CASE("stouffer") {
  std::vector<double> one{0.037};
  CHECK(stouffer_combine(one) == 0.037);
  std::vector<double> two{0.05, 0.05};
  CHECK(stouffer_combine(two) == doctest::Approx(0.0101).epsilon(0.01));
  CHECK(stouffer_combine(two) == doctest::Approx(upper_tail(std::sqrt(2.0) * 1.6448536269514722)));
  std::vector<double> mirror{0.2, 0.8};
  CHECK(stouffer_combine(mirror) == doctest::Approx(0.5).epsilon(1e-12));

  std::vector<double> ps{0.01, 0.3, 0.6};
  std::vector<double> w{std::sqrt(20.0), std::sqrt(9.0), std::sqrt(12.0)};
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    num += w[i] * normal_upper_quantile(ps[i]);
    den += w[i] * w[i];
  }
  CHECK(stouffer_combine(ps, w) == doctest::Approx(upper_tail(num / std::sqrt(den))).epsilon(1e-12));

  std::vector<double> zero{0.0, 0.5};
  std::vector<double> unit{1.0, 0.5};
  CHECK(code_of([&] { stouffer_combine(zero); }) == ErrorCode::DegeneratePValue);
  CHECK(code_of([&] { stouffer_combine(unit); }) == ErrorCode::DegeneratePValue);
}

TEST_CASE("normal helpers round trip") {
  for (double p : {1e-10, 0.001, 0.05, 0.3, 0.5, 0.9, 0.999}) {
    CHECK(normal_upper_tail(normal_upper_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK(normal_upper_quantile(0.05) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(normal_upper_tail(0.0) == 0.5);
}

TEST_CASE("bonferroni and effect size") {
  CHECK(bonferroni(0.01, 5) == doctest::Approx(0.05));
  CHECK(bonferroni(0.3, 5) == 1.0);
  CHECK(bonferroni(0.123, 1) == 0.123);
  CHECK_THROWS_AS(bonferroni(0.1, 0), Error);

  std::vector<double> d{1.0, 2.0, 3.0};
  CHECK(paired_cohens_d(d) == doctest::Approx(2.0));
  std::vector<double> z(4, 0.0);
  CHECK(paired_cohens_d(z) == 0.0);
}
