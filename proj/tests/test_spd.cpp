#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "acm/error.hpp"
#include "acm/spd.hpp"

using namespace acm;
using testing::random_spd;

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

}  // namespace

TEST_CASE("SpdMatrix gate") {
  Eigen::MatrixXd m(2, 2);
  m << 2, 1e-12, 0, 3;
  const SpdMatrix s(m);
  CHECK(s.values()(0, 1) == doctest::Approx(0.5e-12));
  CHECK(s.values()(0, 1) == s.values()(1, 0));

  Eigen::MatrixXd semi(2, 2);
  semi << 1, 1, 1, 1;
  CHECK(code_of([&] { SpdMatrix{semi}; }) == ErrorCode::NotSpd);

  Eigen::MatrixXd tiny = Eigen::MatrixXd::Identity(2, 2);
  tiny(1, 1) = 1e-11;
  CHECK(code_of([&] { SpdMatrix{tiny}; }) == ErrorCode::NotSpd);
  tiny(1, 1) = 1e-9;
  CHECK_NOTHROW(SpdMatrix{tiny});

  Eigen::MatrixXd bad(2, 3);
  bad.setOnes();
  CHECK_THROWS_AS(SpdMatrix{bad}, Error);
}

TEST_CASE("TangentSymm rejects asymmetric input") {
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, -1, 0;
  CHECK(code_of([&] { TangentSymm{m}; }) == ErrorCode::NotSymmetric);
  m << 0, 1, 1, -5;
  CHECK_NOTHROW(TangentSymm{m});
}

TEST_CASE("symm_fn examples") {
  CHECK(symm_fn(Eigen::MatrixXd::Identity(3, 3), MatrixFunction::Log).norm() < 1e-15);

  Eigen::MatrixXd d = Eigen::Vector2d(4, 9).asDiagonal();
  const Eigen::MatrixXd r = symm_fn(d, MatrixFunction::Sqrt);
  CHECK(r(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r(1, 1) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(std::abs(r(0, 1)) < 1e-15);

  std::mt19937_64 rng(1);
  const Eigen::MatrixXd m = random_spd(rng, 5);
  const Eigen::MatrixXd back = symm_fn(symm_fn(m, MatrixFunction::Log), MatrixFunction::Exp);
  CHECK((back - m).norm() < 1e-8);

  const Eigen::MatrixXd is = symm_fn(m, MatrixFunction::InvSqrt);
  CHECK((is * m * is - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-10);
}

TEST_CASE("symm_fn errors") {
  Eigen::MatrixXd m = Eigen::Vector2d(1, -2).asDiagonal();
  for (auto f : {MatrixFunction::Log, MatrixFunction::Sqrt, MatrixFunction::InvSqrt}) {
    try {
      symm_fn(m, f);
      FAIL("expected failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonPositiveEigenvalue);
      CHECK(std::string(e.what()).find("-2") != std::string::npos);
    }
  }
  CHECK_NOTHROW(symm_fn(m, MatrixFunction::Exp));
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 0, 1;
  CHECK(code_of([&] { symm_fn(a, MatrixFunction::Exp); }) == ErrorCode::NotSymmetric);
}

TEST_CASE("distance examples") {
  const SpdMatrix i2 = SpdMatrix::identity(2);
  CHECK(affine_invariant_distance(i2, i2) == 0.0);
  const SpdMatrix e(Eigen::MatrixXd(Eigen::Vector2d(std::exp(1.0), std::exp(-1.0)).asDiagonal()));
  CHECK(affine_invariant_distance(i2, e) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const Eigen::MatrixXd a = random_spd(rng, 4), b = random_spd(rng, 4);
    CHECK(std::abs(affine_invariant_distance(SpdMatrix(a), SpdMatrix(b)) -
                   testing::distance_oracle(a, b)) < 1e-10);
  }
  CHECK(code_of([&] { affine_invariant_distance(i2, SpdMatrix::identity(3)); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("distance properties on random pairs") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = 2 + k % 7;
    const SpdMatrix a(random_spd(rng, n)), b(random_spd(rng, n)), c(random_spd(rng, n));
    const Eigen::MatrixXd w = testing::random_invertible(rng, n);
    const double dab = affine_invariant_distance(a, b);
    CHECK(std::abs(dab - affine_invariant_distance(b, a)) < 1e-10);
    const SpdMatrix wa(w * a.values() * w.transpose()), wb(w * b.values() * w.transpose());
    CHECK(std::abs(dab - affine_invariant_distance(wa, wb)) < 1e-8);
    const SpdMatrix ia(a.values().inverse()), ib(b.values().inverse());
    CHECK(std::abs(dab - affine_invariant_distance(ia, ib)) < 1e-8);
    CHECK(dab <= affine_invariant_distance(a, c) + affine_invariant_distance(c, b) + 1e-9);
  }
}

TEST_CASE("log and exp maps") {
  std::mt19937_64 rng(4);
  const SpdMatrix p(random_spd(rng, 4)), q(random_spd(rng, 4));
  CHECK(log_map(p, p).values().norm() < 1e-12);

  const SpdMatrix i4 = SpdMatrix::identity(4);
  CHECK((log_map(i4, q).values() - symm_fn(q.values(), MatrixFunction::Log)).norm() < 1e-12);

  const TangentSymm zero(Eigen::MatrixXd::Zero(4, 4));
  CHECK((exp_map(p, zero).values() - p.values()).norm() < 1e-12);

  Eigen::MatrixXd s = testing::gaussian(rng, 4, 4);
  s = (0.5 * (s + s.transpose())).eval();
  const Eigen::MatrixXd expm =
      testing::general_fn(s, [](std::complex<double> z) { return std::exp(z); });
  CHECK((exp_map(i4, TangentSymm(s)).values() - expm).norm() < 1e-10);

  for (int k = 0; k < 10; ++k) {
    const SpdMatrix a(random_spd(rng, 5)), b(random_spd(rng, 5));
    CHECK((exp_map(a, log_map(a, b)).values() - b.values()).norm() < 1e-8);
  }
  CHECK(code_of([&] { log_map(p, SpdMatrix::identity(2)); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([&] { exp_map(p, TangentSymm(Eigen::MatrixXd::Zero(2, 2))); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("frechet mean examples") {
  std::mt19937_64 rng(5);
  const SpdMatrix p(random_spd(rng, 3));
  std::vector<SpdMatrix> one{p};
  CHECK((frechet_mean(one).values() - p.values()).norm() == 0.0);

  std::vector<SpdMatrix> eye(3, SpdMatrix::identity(3));
  CHECK((frechet_mean(eye).values() - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);

  for (int k = 0; k < 20; ++k) {
    const Eigen::MatrixXd a = random_spd(rng, 2 + k % 5), b = random_spd(rng, 2 + k % 5);
    std::vector<SpdMatrix> two{SpdMatrix(a), SpdMatrix(b)};
    CHECK((frechet_mean(two).values() - testing::two_matrix_mean(a, b)).norm() < 1e-8);
  }
  CHECK(code_of([] { frechet_mean(std::vector<SpdMatrix>{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("frechet mean properties") {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 10; ++k) {
    const Eigen::Index n = 3 + k % 4;
    std::vector<SpdMatrix> set, moved;
    const Eigen::MatrixXd w = testing::random_invertible(rng, n);
    for (int i = 0; i < 8; ++i) {
      const Eigen::MatrixXd m = random_spd(rng, n, 1.0);
      set.emplace_back(m);
      moved.emplace_back(w * m * w.transpose());
    }
    const SpdMatrix mean = frechet_mean(set);
    const Eigen::MatrixXd expected = w * mean.values() * w.transpose();
    const SpdMatrix moved_mean = frechet_mean(moved);
    CHECK((moved_mean.values() - expected).norm() / expected.norm() < 1e-7);

    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : set) grad += log_map(mean, m).values();
    CHECK(grad.norm() / static_cast<double>(set.size()) < 1e-8);
  }
}

TEST_CASE("frechet mean reports non-convergence") {
  std::mt19937_64 rng(7);
  std::vector<SpdMatrix> set;
  for (int i = 0; i < 6; ++i) set.emplace_back(random_spd(rng, 4, 3.0));
  try {
    frechet_mean(set, 1e-8, 1);
    FAIL("expected NoConvergence");
  } catch (const FrechetNoConvergence& e) {
    CHECK(e.code() == ErrorCode::NoConvergence);
    CHECK(e.residual() > 1e-8);
    CHECK(e.last_iterate().dim() == 4);
  }
}
