#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lpshrink/mp_law.hpp"

using namespace lpshrink;

namespace {

// Root in the upper half-plane of z m^2 + (z + 1 - phi) m + 1 = 0 (Sigma = I).
Complex quadratic_m(Complex z, double phi) {
  const Complex b = z + 1.0 - phi;
  const Complex disc = std::sqrt(b * b - 4.0 * z);
  const Complex r1 = (-b + disc) / (2.0 * z);
  const Complex r2 = (-b - disc) / (2.0 * z);
  return r1.imag() > r2.imag() ? r1 : r2;
}

// Marchenko-Pastur density of the spectrum of S for Sigma = I.
double mp_density(double x, double phi) {
  const double a = std::pow(1.0 - std::sqrt(phi), 2);
  const double b = std::pow(1.0 + std::sqrt(phi), 2);
  if (x <= a || x >= b) return 0.0;
  return std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * phi * x);
}

// All roots of a complex polynomial (coefficients highest degree first),
// by Durand-Kerner iteration.
std::vector<Complex> poly_roots(const std::vector<Complex>& c) {
  const std::size_t n = c.size() - 1;
  std::vector<Complex> r(n);
  for (std::size_t k = 0; k < n; ++k) r[k] = std::pow(Complex{0.4, 0.9}, static_cast<double>(k));
  auto eval = [&](Complex x) {
    Complex v = 0.0;
    for (const auto& a : c) v = v * x + a;
    return v / c[0];
  };
  for (int it = 0; it < 2000; ++it) {
    for (std::size_t k = 0; k < n; ++k) {
      Complex d = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != k) d *= r[k] - r[j];
      r[k] -= eval(r[k]) / d;
    }
  }
  return r;
}

// Upper-half-plane root for pi = (delta_1 + delta_{1/a})/2, written as a
// cubic by clearing denominators of -1/m + phi/2 [1/(m+1) + 1/(m+a)] = z.
Complex cubic_m(Complex z, double phi, double a) {
  const auto roots = poly_roots({z, z * (1.0 + a) + 1.0 - phi,
                                 z * a + (1.0 + a) - phi * (1.0 + a) / 2.0, Complex{a, 0.0}});
  Complex best{0.0, -1.0};
  int upper = 0;
  for (const auto& r : roots) {
    if (r.imag() > 1e-12) {
      ++upper;
      best = r;
    }
  }
  REQUIRE(upper == 1);
  return best;
}

}  // namespace

TEST_CASE("solve_m matches the quadratic root at reference points") {
  const auto psm = PopulationSpectralMeasure::identity();
  const auto s = solve_m({0.0, 1.0}, psm, 0.5);
  CHECK(s.m.real() == doctest::Approx(0.19303041).epsilon(1e-8));
  CHECK(s.m.imag() == doctest::Approx(0.79110179).epsilon(1e-8));
  CHECK(s.residual <= 1e-12);

  const auto neg = solve_m({-1.0, 1e-12}, psm, 0.5);
  CHECK(neg.m.real() == doctest::Approx(0.78077641).epsilon(1e-8));
  CHECK(std::abs(neg.m.imag()) < 1e-9);
}

TEST_CASE("solve_m agrees with the quadratic on a grid") {
  const auto psm = PopulationSpectralMeasure::identity();
  for (double phi : {0.1, 0.5, 0.9}) {
    for (double E = -2.0; E <= 4.0; E += 0.37) {
      for (double eta : {1e-3, 1e-2, 0.3, 4.0}) {
        const Complex z{E, eta};
        const Complex m = solve_m(z, psm, phi).m;
        CHECK(std::abs(m - quadratic_m(z, phi)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("solve_m agrees with the cubic for a two-atom measure") {
  const PopulationSpectralMeasure psm({{1.0, 0.5}, {3.0, 0.5}});
  for (Complex z : {Complex{1.0, 1.0}, Complex{0.3, 0.01}, Complex{4.0, 0.05}, Complex{-1.0, 2.0},
                    Complex{8.0, 0.001}}) {
    const Complex m = solve_m(z, psm, 0.5).m;
    CHECK(std::abs(m - cubic_m(z, 0.5, 1.0 / 3.0)) <= 1e-9);
  }
}

TEST_CASE("solver properties on random inputs") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> E(-3.0, 10.0);
  std::uniform_real_distribution<double> logeta(-3.0, 1.0);
  std::uniform_real_distribution<double> tau(0.2, 5.0);
  std::uniform_real_distribution<double> phi(0.1, 0.9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PopulationSpectralMeasure::Atom> atoms;
    const int k = 1 + trial % 4;
    for (int j = 0; j < k; ++j) atoms.push_back({tau(rng), 1.0 / k});
    const PopulationSpectralMeasure psm(atoms);
    const Complex z{E(rng), std::pow(10.0, logeta(rng))};
    const double p = phi(rng);
    const auto s = solve_m(z, psm, p);
    // Stieltjes transform of a probability measure: upper half-plane, |m| <= 1/eta.
    CHECK(s.m.imag() > 0.0);
    CHECK(std::abs(s.m) <= 1.0 / z.imag() * (1.0 + 1e-9));
    CHECK(std::abs(mp_root_function(s.m, psm, p) - z) <= 1e-10 * std::max(1.0, std::abs(z)));
    // A warm start from a nearby point lands on the same root.
    const auto warm = solve_m(z, psm, p, {}, s.m + Complex{0.0, 1e-3});
    CHECK(std::abs(warm.m - s.m) <= 1e-10);
  }
}

TEST_CASE("root function derivative matches finite differences") {
  const PopulationSpectralMeasure psm({{1.0, 0.3}, {2.0, 0.7}});
  const Complex m{0.2, 0.7};
  const Complex h{1e-6, 0.0};
  const Complex fd = (mp_root_function(m + h, psm, 0.4) - mp_root_function(m - h, psm, 0.4)) / (2.0 * h);
  CHECK(std::abs(fd - mp_root_function_derivative(m, psm, 0.4)) < 1e-7);
}

TEST_CASE("solver input errors") {
  const auto psm = PopulationSpectralMeasure::identity();
  CHECK_THROWS_AS(solve_m({1.0, 0.0}, psm, 0.5), DomainError);
  CHECK_THROWS_AS(solve_m({1.0, -1.0}, psm, 0.5), DomainError);
  SolverOptions starved{1e-300, 1};
  CHECK_THROWS_AS(solve_m({1.0, 1.0}, psm, 0.5, starved), SolverError);
}

TEST_CASE("boundary values and densities for the identity") {
  const auto psm = PopulationSpectralMeasure::identity();
  const auto bv = boundary_value(1.0, psm, 0.5, default_eta_schedule());
  CHECK(bv.m_check.real() == doctest::Approx(-0.75).epsilon(1e-6));
  CHECK(bv.m_check.imag() == doctest::Approx(0.66143783).epsilon(1e-6));
  CHECK_FALSE(bv.flagged);

  std::vector<double> grid;
  for (double E = 0.0; E <= 3.5; E += 0.05) grid.push_back(E);
  const auto profile = boundary_profile(grid, psm, 0.5);
  CHECK(profile.atom_at_zero == doctest::Approx(0.5));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] == 0.0) continue;
    CHECK(std::abs(profile.w_S[i] - mp_density(grid[i], 0.5)) < 1e-5);
    CHECK(profile.w[i] == doctest::Approx(0.5 * profile.w_S[i]).epsilon(1e-9));
  }
  REQUIRE(profile.edges.size() == 1);
  CHECK(profile.edges[0].lower == doctest::Approx(std::pow(1.0 - std::sqrt(0.5), 2)).epsilon(1e-5));
  CHECK(profile.edges[0].upper == doctest::Approx(std::pow(1.0 + std::sqrt(0.5), 2)).epsilon(1e-5));

  // w_S(1) from the closed-form density.
  const std::vector<double> one{1.0};
  CHECK(boundary_profile(one, psm, 0.5).w_S[0] == doctest::Approx(0.42108440).epsilon(1e-6));
}

TEST_CASE("support edges") {
  const auto edges = support_edges(PopulationSpectralMeasure::identity(), 0.5);
  REQUIRE(edges.size() == 1);
  // Threshold detection at w = 1e-4 on the eta-extrapolated density sits
  // within ~1e-5 of the closed-form edges (1 -+ sqrt(phi))^2.
  CHECK(std::abs(edges[0].lower - 0.0857864376) < 1e-4);
  CHECK(std::abs(edges[0].upper - 2.9142135624) < 1e-4);

  // Well separated atoms at small phi split the support in two.
  const auto split = support_edges(PopulationSpectralMeasure({{1.0, 0.5}, {10.0, 0.5}}), 0.05);
  CHECK(split.size() == 2);
  for (std::size_t k = 1; k < split.size(); ++k) CHECK(split[k].lower > split[k - 1].upper);
}

TEST_CASE("local law control parameter") {
  const Complex m = quadratic_m({0.0, 1.0}, 0.5);
  const auto b = psi({0.0, 1.0}, m, 1000);
  CHECK(b.psi == doctest::Approx(0.0291265).epsilon(1e-5));
}

TEST_CASE("companion and esd transforms") {
  // For Sigma = I the Stieltjes transform of the spectrum of S solves
  // phi z mS^2 + (z - 1 + phi) mS + 1 = 0.
  const double phi = 0.3;
  const Complex z{1.3, 0.2};
  const Complex m = solve_m(z, PopulationSpectralMeasure::identity(), phi).m;
  const Complex mS = companion_to_esd(m, z, phi);
  CHECK(std::abs(phi * z * mS * mS + (z - 1.0 + phi) * mS + 1.0) < 1e-12);
}
