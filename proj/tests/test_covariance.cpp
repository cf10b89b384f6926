#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"

#include "acm/covariance.hpp"
#include "acm/data_io.hpp"
#include "acm/error.hpp"

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

Epoch row(std::initializer_list<double> v) {
  Epoch e;
  e.data.resize(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) e.data(0, i++) = x;
  return e;
}

}  // namespace

TEST_CASE("sample covariance") {
  const SpdMatrix c = sample_covariance(row({1, -1, 1, -1}));
  CHECK(c.dim() == 1);
  CHECK(c.values()(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));

  std::mt19937_64 rng(11);
  const SpdMatrix w = sample_covariance(testing::random_epoch(rng, 2, 10000));
  CHECK((w.values() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.05);

  Epoch dup = testing::random_epoch(rng, 3, 200);
  dup.data.row(2) = dup.data.row(0);
  try {
    sample_covariance(dup);
    FAIL("expected NotSPD");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotSpd);
    CHECK(std::string(e.what()).find("shrinkage") != std::string::npos);
  }

  CHECK(code_of([] { sample_covariance(row({1.0})); }) == ErrorCode::InvalidEpoch);
  CHECK(code_of([] { sample_covariance(row({1.0, std::nan("")})); }) == ErrorCode::InvalidEpoch);
  CHECK(code_of([] {
          sample_covariance(row({1.0, std::numeric_limits<double>::infinity(), 2.0}));
        }) == ErrorCode::InvalidEpoch);
}

TEST_CASE("embed_epoch examples") {
  std::mt19937_64 rng(12);
  const Epoch x = testing::random_epoch(rng, 3, 50);
  for (int tau : {1, 4, 9}) CHECK(embed_epoch(x, {1, tau}).data == x.data);

  const Epoch e = embed_epoch(row({1, 2, 3, 4}), {2, 1});
  Eigen::MatrixXd expected(2, 3);
  expected << 1, 2, 3, 2, 3, 4;
  CHECK(e.data == expected);

  const Epoch y = testing::random_epoch(rng, 2, 100);
  const Epoch z = embed_epoch(y, {3, 2});
  REQUIRE(z.channels() == 6);
  REQUIRE(z.samples() == 96);
  for (Eigen::Index j = 0; j < 96; ++j) {
    // Delay vector (x_{t-4}, x_{t-2}, x_t) per channel with t = j + 4.
    for (Eigen::Index ch = 0; ch < 2; ++ch) {
      CHECK(z.data(0 * 2 + ch, j) == y.data(ch, j));
      CHECK(z.data(1 * 2 + ch, j) == y.data(ch, j + 2));
      CHECK(z.data(2 * 2 + ch, j) == y.data(ch, j + 4));
    }
  }
  CHECK(code_of([&] { embed_epoch(y, {3, 50}); }) == ErrorCode::LagTooLarge);
  CHECK(code_of([&] { embed_epoch(y, {35, 3}); }) == ErrorCode::LagTooLarge);
  CHECK(embed_epoch(y, {2, 99}).samples() == 1);
}

TEST_CASE("augmented covariance identities") {
  std::mt19937_64 rng(13);
  const Epoch x = testing::random_epoch(rng, 3, 300);
  const SpdMatrix plain = sample_covariance(x);
  CHECK(augmented_covariance(x, {1, 1}, false).values() == plain.values());
  CHECK(augmented_covariance(x, {1, 7}, false).values() == plain.values());

  for (int k = 0; k < 30; ++k) {
    const int d = 1 + k % 4, p = 1 + k % 5, tau = 1 + (k * 7) % 5;
    const Epoch e = testing::random_epoch(rng, d, 120 + 10 * k);
    const SpdMatrix g = augmented_covariance(e, {p, tau}, false);
    CHECK(g.dim() == d * p);
    CHECK(g.values() == sample_covariance(embed_epoch(e, {p, tau})).values());
    const Eigen::MatrixXd oracle = testing::block_assembly(e.data, p, tau);
    CHECK((g.values() - oracle).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, oracle.norm()));
    CHECK((g.values() - g.values().transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("block ordering only permutes the matrix") {
  std::mt19937_64 rng(14);
  const int d = 2, p = 3, tau = 2;
  const Eigen::Index n = d * p;
  // Reversing the block order is a congruence by a permutation matrix.
  Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < p; ++k)
    perm.block((p - 1 - k) * d, k * d, d, d) = Eigen::MatrixXd::Identity(d, d);
  const Epoch a = testing::random_epoch(rng, d, 400), b = testing::random_epoch(rng, d, 400);
  const SpdMatrix ga = augmented_covariance(a, {p, tau}, false);
  const SpdMatrix gb = augmented_covariance(b, {p, tau}, false);
  const SpdMatrix ra(perm * ga.values() * perm.transpose());
  const SpdMatrix rb(perm * gb.values() * perm.transpose());
  CHECK(affine_invariant_distance(ga, gb) ==
        doctest::Approx(affine_invariant_distance(ra, rb)).epsilon(1e-10));
}

TEST_CASE("shrinkage defaults") {
  CHECK_FALSE(shrinkage_enabled(Shrinkage::Auto, {1, 3}));
  CHECK(shrinkage_enabled(Shrinkage::Auto, {2, 1}));
  CHECK(shrinkage_enabled(Shrinkage::On, {1, 1}));
  CHECK_FALSE(shrinkage_enabled(Shrinkage::Off, {5, 1}));

  // A rank-deficient augmentation fails unshrunk and passes shrunk.
  Epoch x = row({1, 2, 3, 4, 5, 6});
  CHECK(code_of([&] { augmented_covariance(x, {5, 1}, false); }) == ErrorCode::NotSpd);
  const SpdMatrix s = augmented_covariance(x, {5, 1}, true);
  CHECK(s.dim() == 5);
}

TEST_CASE("ledoit-wolf") {
  std::mt19937_64 rng(15);
  {
    const Eigen::MatrixXd y = testing::gaussian(rng, 3, 20000);
    const Eigen::MatrixXd c = y * y.transpose() / (20000.0 - 1.0);
    const ShrunkCovariance s = ledoit_wolf(c, y);
    CHECK((s.covariance.values() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.05);
  }
  for (int k = 0; k < 50; ++k) {
    const Eigen::Index n = 2 + k % 9;
    const Eigen::Index m = 2 + (k * 5) % 30;
    Eigen::MatrixXd y = testing::gaussian(rng, n, m);
    if (k % 3 == 0) y.row(0) *= 10.0;
    const Eigen::MatrixXd c = y * y.transpose() / static_cast<double>(m - 1);
    const ShrunkCovariance s = ledoit_wolf(c, y);
    CHECK(s.lambda >= 0.0);
    CHECK(s.lambda <= 1.0);
    CHECK(std::abs(s.lambda - testing::ledoit_wolf_lambda_oracle(y)) < 1e-10);
    CHECK(std::abs(s.covariance.values().trace() - c.trace()) < 1e-10 * std::max(1.0, c.trace()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.covariance.values());
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    if (m < n) CHECK(s.lambda > 0.0);
  }
  const Eigen::MatrixXd y = testing::gaussian(rng, 3, 50);
  const Eigen::MatrixXd c = y * y.transpose() / 49.0;
  CHECK(code_of([&] { ledoit_wolf(2.0 * c, y); }) == ErrorCode::InconsistentInput);
  CHECK(code_of([&] { ledoit_wolf(c, testing::gaussian(rng, 4, 50)); }) ==
        ErrorCode::InconsistentInput);
}

TEST_CASE("yule-walker") {
  {
    std::vector<Eigen::MatrixXd> g{Eigen::MatrixXd::Constant(1, 1, 2.0),
                                   Eigen::MatrixXd::Constant(1, 1, 1.0)};
    const YuleWalkerSolution s = yule_walker_solve(g, 1);
    CHECK(s.coefficients.size() == 1);
    CHECK(s.coefficients[0](0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(s.innovation(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  }
  {
    std::mt19937_64 rng(16);
    const Eigen::MatrixXd g0 = testing::random_spd(rng, 3);
    std::vector<Eigen::MatrixXd> g{g0, Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3),
                                   Eigen::MatrixXd::Zero(3, 3)};
    const YuleWalkerSolution s = yule_walker_solve(g, 3);
    CHECK(s.coefficients.size() == 3);
    for (const auto& a : s.coefficients) CHECK(a.cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s.innovation - g0).norm() < 1e-12);
  }
  {
    std::vector<Eigen::MatrixXd> g{Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)};
    CHECK(code_of([&] { yule_walker_solve(g, 1); }) == ErrorCode::SingularSystem);
  }
}

TEST_CASE("yule-walker recovers a simulated AR(1)") {
  ArSpec spec;
  Eigen::MatrixXd a(2, 2);
  a << 0.5, 0.2, -0.1, 0.3;
  spec.classes.push_back({"c", {a}, Eigen::MatrixXd::Identity(2, 2)});
  spec.samples = 20000;
  spec.epochs_per_class = 1;
  spec.seed = 5;
  const EpochSet set = generate_ar_dataset(spec);
  const Epoch& x = set.sessions[0].epochs[0];
  std::vector<Eigen::MatrixXd> g{lagged_covariance(x, 0), lagged_covariance(x, 1)};
  const YuleWalkerSolution s = yule_walker_solve(g, 1);
  CHECK((s.coefficients[0] - a).cwiseAbs().maxCoeff() < 0.05);
  CHECK((s.innovation - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("lagged covariance") {
  const Epoch x = row({1, 2, 3, 4});
  CHECK(lagged_covariance(x, 0)(0, 0) == doctest::Approx(30.0 / 4.0));
  // (2*1 + 3*2 + 4*3) / 4
  CHECK(lagged_covariance(x, 1)(0, 0) == doctest::Approx(20.0 / 4.0));
  CHECK_THROWS_AS(lagged_covariance(x, 4), Error);
}
