#include <doctest.h>

#include <set>

#include "lpshrink/sampling.hpp"

using namespace lpshrink;

TEST_CASE("seed derivation is a pure function") {
  CHECK(mix_seed(1) == mix_seed(1));
  CHECK(mix_seed(1) != mix_seed(2));
  CHECK(derive_seed(7, 64, 3) == derive_seed(7, 64, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t n : {64u, 128u, 256u})
    for (std::uint64_t r = 0; r < 100; ++r) seen.insert(derive_seed(42, n, r));
  CHECK(seen.size() == 300);
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}

TEST_CASE("real data matrix has variance 1/N and is reproducible") {
  const ModelConfig cfg{200, 400, Field::Real};
  const auto X = sample_data<double>(cfg, 11);
  CHECK(X.entries.rows() == 200);
  CHECK(X.entries.cols() == 400);
  const double var = X.entries.squaredNorm() / X.entries.size();
  CHECK(var * 400 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(std::abs(X.entries.mean()) < 5.0 / std::sqrt(400.0 * 80000.0));

  const auto Y = sample_data<double>(cfg, 11);
  CHECK((X.entries - Y.entries).norm() == 0.0);
  const auto Z = sample_data<double>(cfg, 12);
  CHECK((X.entries - Z.entries).norm() > 1.0);
}

TEST_CASE("complex data matrix") {
  const ModelConfig cfg{150, 300, Field::Complex};
  const auto X = sample_data<Complex>(cfg, 5);
  const double var = X.entries.cwiseAbs2().sum() / X.entries.size();
  CHECK(var * 300 == doctest::Approx(1.0).epsilon(0.03));
  // E x^2 = 0 for the circular complex Gaussian.
  const Complex second = X.entries.array().square().sum() / static_cast<double>(X.entries.size());
  CHECK(std::abs(second) * 300 < 0.03);
}

TEST_CASE("sample covariance matches the direct product") {
  VectorXd taus(6);
  taus << 4, 3, 2, 1.5, 1, 0.5;
  const auto sigma = PopulationCovariance::diagonal(taus);
  const auto X = sample_data<double>(ModelConfig{6, 20, Field::Real}, 9);
  const auto cov = sample_cov(sigma, X);
  const MatrixXd direct = sigma.sqrt() * X.entries * X.entries.transpose() * sigma.sqrt();
  CHECK((cov.S - direct).norm() < 1e-12);
  CHECK((cov.S - cov.S.transpose()).norm() == 0.0);
  const auto& e = cov.eigensystem;
  for (int i = 1; i < 6; ++i) CHECK(e.eigenvalues[i] <= e.eigenvalues[i - 1]);
  CHECK((cov.S * e.vectors - e.vectors * e.eigenvalues.asDiagonal()).norm() < 1e-11);

  const auto values_only = sample_cov(sigma, X, false);
  CHECK((values_only.eigensystem.eigenvalues - e.eigenvalues).norm() < 1e-12);
  CHECK(values_only.eigensystem.vectors.size() == 0);

  const auto Xc = sample_data<Complex>(ModelConfig{6, 20, Field::Complex}, 9);
  const auto ccov = sample_cov(sigma, Xc);
  CHECK((ccov.S - ccov.S.adjoint()).norm() == 0.0);
  CHECK(ccov.eigensystem.eigenvalues.minCoeff() > 0.0);
}

TEST_CASE("sample covariance is unbiased for Sigma") {
  VectorXd taus(4);
  taus << 4, 3, 2, 1;
  const auto sigma = PopulationCovariance::diagonal(taus);
  MatrixXd mean = MatrixXd::Zero(4, 4);
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    mean += sample_cov(sigma, sample_data<double>(ModelConfig{4, 50, Field::Real}, derive_seed(1, r)), false).S;
  }
  mean /= reps;
  for (int i = 0; i < 4; ++i) CHECK(mean(i, i) == doctest::Approx(taus[i]).epsilon(0.05));
  CHECK(std::abs(mean(0, 1)) < 0.1);
}
