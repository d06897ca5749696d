#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "fedrd/estimator.hpp"
#include "oracle.hpp"

using namespace fedrd;

namespace {

SurvivalDataset two_subjects(double y1, int d1, double x1, double y2, int d2, double x2) {
  SurvivalDataset data;
  data.p = 1;
  data.subjects = {{y1, d1, {x1}}, {y2, d2, {x2}}};
  return data;
}

}  // namespace

TEST_CASE("hand-evaluated accumulators") {
  // grid {1,2}, xbar(1)=0.5, xbar(2)=1
  Accumulators acc = compute_components(two_subjects(1, 1, 0.0, 2, 1, 1.0));
  CHECK(acc.a_mat(0, 0) == Catch::Approx(0.5).margin(1e-14));
  CHECK(acc.d_vec[0] == Catch::Approx(-0.5).margin(1e-14));
  CHECK(acc.sigma_mat(0, 0) == Catch::Approx(0.25).margin(1e-14));
  CHECK(acc.n == 2);

  Accumulators cens = compute_components(two_subjects(1, 1, 1.0, 2, 0, 0.0));
  CHECK(cens.a_mat(0, 0) == Catch::Approx(0.5).margin(1e-14));
  CHECK(cens.d_vec[0] == Catch::Approx(0.5).margin(1e-14));
  CHECK(cens.sigma_mat(0, 0) == Catch::Approx(0.25).margin(1e-14));
}

TEST_CASE("constant covariate column gives zero sums") {
  SurvivalDataset data;
  data.p = 2;
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int i = 0; i < 20; ++i)
    data.subjects.push_back({u(gen), i % 2, {3.0, u(gen)}});  // first column constant
  Accumulators acc = compute_components(data);
  CHECK(acc.a_mat(0, 0) == 0.0);
  CHECK(acc.a_mat(0, 1) == Catch::Approx(0.0).margin(1e-12));
  CHECK(acc.d_vec[0] == 0.0);
  CHECK(acc.sigma_mat(0, 0) == 0.0);
}

TEST_CASE("fit_local hand fixtures") {
  FitResult f1 = fit_local(two_subjects(1, 1, 0.0, 2, 1, 1.0));
  CHECK(f1.beta[0] == Catch::Approx(-1.0).margin(1e-12));
  CHECK(f1.cov(0, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(f1.method == Method::local);
  CHECK(f1.n == 2);

  FitResult f2 = fit_local(two_subjects(1, 1, 1.0, 2, 0, 0.0));
  CHECK(f2.beta[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(f2.cov(0, 0) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("single subject is singular") {
  SurvivalDataset one;
  one.p = 1;
  one.subjects = {{1.0, 1, {0.7}}};
  CHECK_THROWS_AS(fit_local(one), SingularInformation);
}

TEST_CASE("components match the naive textbook oracle") {
  std::mt19937_64 gen(101);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 5 + trial * 3;
    int p = 1 + trial % 4;
    SurvivalDataset data = oracle::random_dataset(gen, n, p, 0.3);
    Accumulators acc = compute_components(data);
    oracle::NaiveComponents ref = oracle::naive_components(data);
    REQUIRE(oracle::mat_close(acc.a_mat, ref.a, 1e-10));
    REQUIRE(oracle::vec_close(acc.d_vec, ref.d, 1e-10));
    REQUIRE(oracle::mat_close(acc.sigma_mat, ref.sigma, 1e-10));
  }
}

TEST_CASE("scale equivariance in time") {
  std::mt19937_64 gen(21);
  SurvivalDataset data = oracle::random_dataset(gen, 60, 3, 0.3);
  const double c = 3.5;
  SurvivalDataset scaled = data;
  for (Subject& s : scaled.subjects) s.time *= c;

  Accumulators a0 = compute_components(data);
  Accumulators a1 = compute_components(scaled);
  for (int i = 0; i < 3; ++i) {
    CHECK(oracle::rel_close(a1.d_vec[i], a0.d_vec[i], 1e-12));
    for (int j = 0; j < 3; ++j) {
      CHECK(oracle::rel_close(a1.a_mat(i, j), c * a0.a_mat(i, j), 1e-10));
      CHECK(oracle::rel_close(a1.sigma_mat(i, j), a0.sigma_mat(i, j), 1e-12));
    }
  }
  FitResult f0 = fit_local(data);
  FitResult f1 = fit_local(scaled);
  for (int i = 0; i < 3; ++i) CHECK(oracle::rel_close(f1.beta[i], f0.beta[i] / c, 1e-9));
}

TEST_CASE("translation invariance in covariates") {
  std::mt19937_64 gen(22);
  SurvivalDataset data = oracle::random_dataset(gen, 60, 2, 0.3);
  SurvivalDataset shifted = data;
  for (Subject& s : shifted.subjects) {
    s.covariates[0] += 7.0;
    s.covariates[1] -= 2.5;
  }
  Accumulators a0 = compute_components(data);
  Accumulators a1 = compute_components(shifted);
  for (int i = 0; i < 2; ++i) {
    CHECK(oracle::rel_close(a1.d_vec[i], a0.d_vec[i], 1e-9));
    for (int j = 0; j < 2; ++j) {
      CHECK(oracle::rel_close(a1.a_mat(i, j), a0.a_mat(i, j), 1e-9));
      CHECK(oracle::rel_close(a1.sigma_mat(i, j), a0.sigma_mat(i, j), 1e-9));
    }
  }
}

TEST_CASE("subject order never affects any output") {
  std::mt19937_64 gen(23);
  SurvivalDataset data = oracle::random_dataset(gen, 40, 3, 0.4);
  SurvivalDataset shuffled = data;
  std::shuffle(shuffled.subjects.begin(), shuffled.subjects.end(), gen);

  Accumulators a0 = compute_components(data);
  Accumulators a1 = compute_components(shuffled);
  CHECK(a0.a_mat.data() == a1.a_mat.data());  // bitwise
  CHECK(a0.d_vec == a1.d_vec);
  CHECK(a0.sigma_mat.data() == a1.sigma_mat.data());

  FitResult f0 = fit_local(data);
  FitResult f1 = fit_local(shuffled);
  CHECK(f0.beta == f1.beta);
  CHECK(f0.cov.data() == f1.cov.data());
}

TEST_CASE("raw sandwich equals normalized sandwich over n") {
  // raw cov = (nA)^{-1} (nSigma) (nA)^{-1} = A^{-1} Sigma A^{-1} / n
  std::mt19937_64 gen(24);
  SurvivalDataset data = oracle::random_dataset(gen, 50, 2, 0.2);
  Accumulators acc = compute_components(data);
  FitResult fit = fit_local(data);
  const double n = static_cast<double>(data.n());
  Mat a_norm = acc.a_mat;
  a_norm *= 1.0 / n;
  Mat s_norm = acc.sigma_mat;
  s_norm *= 1.0 / n;
  Mat ign = symmetrized(solve_spd(a_norm, solve_spd(a_norm, s_norm)));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(oracle::rel_close(fit.cov(i, j), ign(i, j) / n, 1e-9));
}
