#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lpshrink/measures.hpp"
#include "lpshrink/sampling.hpp"
#include "lpshrink/shrinkage.hpp"

using namespace lpshrink;

namespace {

// Antiderivative of the Marchenko-Pastur density (Sigma = I) on [a, b].
double mp_antiderivative(double x, double phi) {
  const double a = std::pow(1.0 - std::sqrt(phi), 2);
  const double b = std::pow(1.0 + std::sqrt(phi), 2);
  const double R = std::sqrt(std::max(0.0, (b - x) * (x - a)));
  const double t1 = std::asin(std::clamp((2.0 * x - a - b) / (b - a), -1.0, 1.0));
  const double t2 = std::asin(std::clamp(((a + b) * x - 2.0 * a * b) / ((b - a) * x), -1.0, 1.0));
  return (R + 0.5 * (a + b) * t1 - std::sqrt(a * b) * t2) / (2.0 * std::numbers::pi * phi);
}

DeterministicMeasure uniform_0_2() {
  return DeterministicMeasure::from_density(
      [](double x) { return x >= 0.0 && x <= 2.0 ? 0.5 : 0.0; }, {{0.0, 2.0}}, 0.0,
      Normalization::EsdOfS, -1.0, 3.0);
}

SampleEigensystem rotated_pair() {
  SampleEigensystem e;
  e.eigenvalues = Eigen::Vector2d(2.0, 1.0);
  e.vectors.resize(2, 2);
  e.vectors << 1, 1, -1, 1;
  e.vectors /= std::sqrt(2.0);
  return e;
}

}  // namespace

TEST_CASE("empirical measures") {
  const auto e = rotated_pair();
  const auto sigma = PopulationCovariance::diagonal(Eigen::Vector2d(3.0, 1.0));
  const auto [mu, nu] = empirical_measures(e, sigma);
  CHECK(mu.total_mass() == doctest::Approx(1.0));
  CHECK(nu.weights[0] == doctest::Approx(1.0));
  CHECK(nu.weights[1] == doctest::Approx(1.0));
  CHECK(nu.total_mass() == doctest::Approx(sigma.trace() / 2.0));

  const auto I = PopulationCovariance::diagonal(VectorXd::Ones(2));
  const auto [mu_i, nu_i] = empirical_measures(e, I);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(mu_i.weights[k] - nu_i.weights[k]) < 1e-15);

  SampleEigensystem bare;
  bare.eigenvalues = Eigen::Vector2d(1.0, 0.5);
  CHECK_THROWS_AS(empirical_measures(bare, I), DomainError);
}

TEST_CASE("vector measures") {
  VectorXd taus(6);
  taus << 3, 3, 3, 1, 1, 1;
  const auto sigma = PopulationCovariance::diagonal(taus);
  const auto cov = sample_cov(sigma, sample_data<double>(ModelConfig{6, 12, Field::Real}, 4));
  const auto& e = cov.eigensystem;

  const auto aligned = vector_measure(e, e.vectors.col(0));
  CHECK(aligned.weights[0] == doctest::Approx(1.0));
  for (std::size_t k = 1; k < aligned.size(); ++k) CHECK(std::abs(aligned.weights[k]) < 1e-12);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  VectorXd x(6);
  for (int i = 0; i < 6; ++i) x[i] = g(rng);
  x.normalize();
  CHECK(vector_measure(e, x).total_mass() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(vector_measure(e, 2.0 * x), DomainError);

  // Averaging the vector measures of the population eigenvectors v_j with
  // weights tau_j / M gives nu_hat; equal weights 1/M give mu_hat.
  const auto [mu, nu] = empirical_measures(e, sigma);
  std::vector<double> weighted(6, 0.0), plain(6, 0.0);
  for (int j = 0; j < 6; ++j) {
    const auto F = vector_measure(e, VectorXd::Unit(6, j));
    for (int i = 0; i < 6; ++i) {
      weighted[i] += taus[j] * F.weights[i] / 6.0;
      plain[i] += F.weights[i] / 6.0;
    }
  }
  for (int i = 0; i < 6; ++i) {
    CHECK(std::abs(weighted[i] - nu.weights[i]) < 1e-9);
    CHECK(std::abs(plain[i] - mu.weights[i]) < 1e-9);
  }
}

TEST_CASE("deterministic masses for the identity") {
  const auto psm = PopulationSpectralMeasure::identity();
  const auto esd = DeterministicMeasure::esd_of_S(psm, 0.5);
  REQUIRE(esd.support().size() == 1);
  const double lo = esd.support()[0].lower;
  const double hi = esd.support()[0].upper;
  CHECK(deterministic_mass(esd, {lo - 0.05, hi + 0.05}) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(deterministic_mass(esd, {hi + 0.1, hi + 0.3}) == 0.0);

  const double exact = mp_antiderivative(1.0, 0.5) - mp_antiderivative(0.0857864376, 0.5);
  CHECK(exact == doctest::Approx(0.576004215103869).epsilon(1e-9));
  CHECK(std::abs(deterministic_mass(esd, {0.0858, 1.0}) - exact) < 1e-4);

  for (double x : esd.grid_density()) CHECK(x >= 0.0);
}

TEST_CASE("companion and esd normalizations") {
  const PopulationSpectralMeasure psm({{1.0, 0.5}, {3.0, 0.5}});
  const double phi = 0.5;
  const auto esd = DeterministicMeasure::esd_of_S(psm, phi);
  const auto comp = DeterministicMeasure::companion(psm, phi);
  CHECK(esd.atom_at_zero() == 0.0);
  CHECK(comp.atom_at_zero() == doctest::Approx(1.0 - phi));
  for (double x = 0.3; x < 8.0; x += 0.37) {
    CHECK(std::abs(comp.density(x) - phi * esd.density(x)) < 1e-9);
  }
  const double lo = esd.support().front().lower - 0.05;
  const double hi = esd.support().back().upper + 0.05;
  CHECK(deterministic_mass(comp, {-0.01, hi}) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(deterministic_mass(esd, {lo, hi}) == doctest::Approx(1.0).epsilon(1e-3));

  // Limit trace preservation: the delta-weighted mass equals the mean of pi.
  const double weighted = deterministic_mass(esd, {lo, hi}, delta_weight(esd));
  CHECK(weighted == doctest::Approx(psm.mean()).epsilon(0.02));
  CHECK_THROWS_AS(delta_weight(comp), DomainError);
}

TEST_CASE("coverage errors") {
  const auto narrow = DeterministicMeasure::from_density(
      [](double x) { return x >= 0.0 && x <= 2.0 ? 0.5 : 0.0; }, {{0.0, 2.0}}, 0.0,
      Normalization::EsdOfS, 0.0, 1.0);
  CHECK_THROWS_AS(deterministic_mass(narrow, {0.0, 1.5}), DomainError);
  CHECK(deterministic_mass(narrow, {0.0, 1.0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(deterministic_mass(narrow, {1.0, 0.5}), DomainError);
}

TEST_CASE("sup interval distance") {
  const auto U = uniform_0_2();
  const AtomicMeasure atom{{1.0}, {1.0}};
  // The interval [1, 1 + h) carries the full atom and almost no uniform mass,
  // so the supremum over intervals tends to 1 as the grid refines.
  for (int grid : {201, 2001}) {
    const IntervalDistance d(U, nullptr, grid);
    const double spacing = d.endpoints()[1] - d.endpoints()[0];
    CHECK(d(atom) == doctest::Approx(1.0 - 0.5 * spacing).epsilon(1e-6));
    // Half-line (Kolmogorov) distance: 0.5.
    double kolmogorov = 0.0;
    double below = 0.0;
    for (std::size_t k = 0; k < d.endpoints().size(); ++k) {
      below = d.endpoints()[k] > 1.0 ? 1.0 : 0.0;
      kolmogorov = std::max(kolmogorov, std::abs(below - d.cumulative()[k]));
    }
    CHECK(kolmogorov == doctest::Approx(0.5).epsilon(2.0 * spacing));
  }

  // Exact discretization of the deterministic measure on the same grid.
  const auto esd = DeterministicMeasure::esd_of_S(PopulationSpectralMeasure::identity(), 0.5);
  const IntervalDistance d(esd, nullptr, 200);
  AtomicMeasure disc;
  for (std::size_t k = 0; k + 1 < d.endpoints().size(); ++k) {
    disc.locations.push_back(0.5 * (d.endpoints()[k] + d.endpoints()[k + 1]));
    disc.weights.push_back(d.cumulative()[k + 1] - d.cumulative()[k]);
  }
  CHECK(d(disc) <= 1e-6);
  CHECK(interval_sup_distance(disc, esd, nullptr, 200) <= 1e-6);
}

TEST_CASE("delta-weighted distance for the identity at N = 1024") {
  const auto psm = PopulationSpectralMeasure::identity();
  const auto esd = DeterministicMeasure::esd_of_S(psm, 0.5);
  const IntervalDistance d(esd, delta_weight(esd), 200);
  const auto sigma = PopulationCovariance::from_psm(psm, 512);
  for (int seed = 0; seed < 50; ++seed) {
    const auto cov = sample_cov(sigma, sample_data<double>(ModelConfig{512, 1024, Field::Real}, derive_seed(99, seed)), false);
    // Sigma = I: nu_hat has weights 1 / M.
    const auto nu = weighted_spectral_measure(cov.eigensystem.eigenvalues, VectorXd::Ones(512));
    CHECK(d(nu) <= 0.05);
  }
}
