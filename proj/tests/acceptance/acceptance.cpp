// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "lpshrink/experiments.hpp"
#include "lpshrink/mp_law.hpp"
#include "lpshrink/resolvent.hpp"
#include "lpshrink/sampling.hpp"
#include "lpshrink/shrinkage.hpp"

using namespace lpshrink;

namespace {

using Outcome = std::pair<bool, std::string>;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto [ok, detail] = body();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, " (%.1fs)", secs);
    report(name, ok, detail + buf);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

std::string sfmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Marchenko-Pastur companion transform for pi = delta_1: the root of
// z m^2 + (z + 1 - phi) m + 1 = 0 in the upper half plane.
Complex mp_quadratic_root(Complex z, double phi) {
  const Complex b = z + 1.0 - phi;
  const Complex s = std::sqrt(b * b - 4.0 * z);
  const Complex r1 = (-b + s) / (2.0 * z);
  const Complex r2 = (-b - s) / (2.0 * z);
  return r1.imag() > r2.imag() ? r1 : r2;
}

// Closed-form boundary value of m_S for pi = delta_1 in the bulk.
Complex mp_boundary_S(double x, double phi) {
  const double disc = 4.0 * phi * x - std::pow(x - 1.0 + phi, 2);
  return Complex{1.0 - phi - x, std::sqrt(std::max(0.0, disc))} / (2.0 * phi * x);
}

PopulationCovariance random_sigma(int M, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 4.0);
  VectorXd t(M);
  for (int i = 0; i < M; ++i) t[i] = u(rng);
  std::sort(t.data(), t.data() + M, std::greater<>());
  return PopulationCovariance::diagonal(t);
}

double median_of(const ResultTable& t, int n) {
  std::vector<double> v;
  for (const auto& r : t.rows)
    if (r.n == n) v.push_back(r.value);
  return quantile(v, 0.5);
}

const PopulationSpectralMeasure two_atoms({{1.0, 0.5}, {3.0, 0.5}});

// Dominance at eps = 0.2 is part of the criterion only when `with_dominance`;
// otherwise it is reported for information.
Outcome trace_rate(Law law, bool with_dominance) {
  ExperimentConfig c;
  c.law = law;
  c.phi = 0.5;
  c.z = {1.0, 1.0};
  c.n_list = {64, 128, 256, 512, 1024};
  c.replicates = 100;
  c.master_seed = 2024;
  const auto t = run_experiment(c);
  const auto fit = fit_rate(t);
  const auto dom = dominance_check(t, 0.2);
  const bool ok = fit.slope >= -1.25 && fit.slope <= -0.75 && (dom.passed || !with_dominance) &&
                  t.failures.empty();
  return Outcome{ok, sfmt("slope=%.3f (se %.3f), dominance eps=0.2 %s%s, ratio slope=%.3f, failures=%zu",
                  fit.slope, fit.stderr_slope, dom.passed ? "ok" : "violated",
                  with_dominance ? "" : " (informational)", dom.ratio_slope,
                  t.failures.size())};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);

  criterion("solver-vs-quadratic", [] {
    double worst = 0.0;
    const double phi = 0.5;
    const auto psm = PopulationSpectralMeasure::identity();
    for (int i = 0; i < 10; ++i) {
      const double E = -2.0 + 6.0 * i / 9.0;
      for (int j = 0; j < 10; ++j) {
        const double eta = std::pow(10.0, -3.0 + 4.0 * j / 9.0);
        const Complex z{E, eta};
        const Complex m = solve_m(z, psm, phi).m;
        const Complex ref = mp_quadratic_root(z, phi);
        worst = std::max(worst, std::abs(m - ref) / std::max(1.0, std::abs(ref)));
      }
    }
    return Outcome{worst <= 1e-10, sfmt("max rel err %.2e over 100 points (<= 1e-10)", worst)};
  });

  criterion("delta-identity-bulk", [] {
    const double phi = 0.5;
    std::vector<double> grid;
    for (int k = 0; k < 400; ++k) grid.push_back(0.2 + 2.6 * k / 399.0);
    const auto profile = boundary_profile(grid, PopulationSpectralMeasure::identity(), phi);
    double worst = 0.0, closed = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      worst = std::max(worst, std::abs(delta(grid[k], profile.m_check_S(k), phi) - 1.0));
      closed = std::max(closed, std::abs(delta(grid[k], mp_boundary_S(grid[k], phi), phi) - 1.0));
    }
    return Outcome{worst <= 1e-6 && closed <= 1e-6,
                     sfmt("max |delta-1| = %.2e (solver), %.2e (closed form) on 400 points", worst, closed)};
  });

  criterion("trace-identity", [] {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> E(-1.0, 8.0), logeta(-2.0, 1.0), phi_d(0.1, 0.9);
    std::uniform_int_distribution<int> M_d(2, 30);
    double worst = 0.0, literal = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto sigma = random_sigma(M_d(rng), rng);
      const double phi = phi_d(rng);
      const Complex z{E(rng), std::pow(10.0, logeta(rng))};
      const Complex m = solve_m(z, sigma.psm(), phi).m;
      const Complex lhs = pi_top_left_mean_trace(sigma, m);
      // 1/m = -z + phi * int x / (1 + m x) dpi gives -(z + 1/m) / phi, i.e.
      // -z (1/(zm) + 1) / phi; the form without the factor z is also reported.
      worst = std::max(worst, std::abs(lhs + (z + 1.0 / m) / phi));
      literal = std::max(literal, std::abs(lhs + (1.0 / (z * m) + 1.0) / phi));
    }
    return Outcome{worst <= 1e-10, sfmt("max |M^-1 Tr(-Sigma(I+m Sigma)^-1) + (z + 1/m)/phi| = %.2e over 50 "
                                        "instances (<= 1e-10); without the factor z: %.2e",
                                        worst, literal)};
  });

  criterion("resolvent-identities", [] {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> g;
    double worst = 0.0;
    int checks = 0;
    for (int trial = 0; trial < 100; ++trial) {
      MatrixXcd A(20, 20);
      for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) A(i, j) = {g(rng), g(rng)};
      A += 10.0 * MatrixXcd::Identity(20, 20);
      const auto r = resolvent_identity_check(IndexedMatrix::square(A), 20, trial);
      worst = std::max(worst, r.max_violation);
      checks += r.checks;
    }
    double green = 0.0;
    std::uniform_real_distribution<double> E(0.0, 4.0), eta(0.1, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
      const auto sigma = random_sigma(8, rng);
      const auto X = sample_data<Complex>(ModelConfig{8, 16, Field::Complex}, derive_seed(41, trial));
      const auto b = build_bundle({E(rng), eta(rng)}, X.entries, sigma);
      const auto r = green_identity_check(b, 8, trial);
      green = std::max(green, r.max_violation);
      checks += r.checks;
    }
    return Outcome{worst <= 1e-9 && green <= 1e-9,
                     sfmt("max defect %.2e (20x20 random), %.2e (G, M=8 N=16); %d checks", worst, green, checks)};
  });

  criterion("resolvent-blocks", [] {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> E(0.0, 4.0), eta(0.05, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const int M = 10, N = 20;
      const auto sigma = random_sigma(M, rng);
      const auto X = sample_data<double>(ModelConfig{M, N, Field::Real}, derive_seed(47, trial));
      const Complex z{E(rng), eta(rng)};
      const auto b = build_bundle(z, X.entries, sigma);
      // Independent reference: direct inverses of both resolvents.
      const MatrixXcd root = sigma.sqrt().cast<Complex>();
      const MatrixXcd Xc = X.entries.cast<Complex>();
      const MatrixXcd RM = (root * Xc * Xc.adjoint() * root - z * MatrixXcd::Identity(M, M)).inverse();
      const MatrixXcd RN =
          (Xc.adjoint() * sigma.matrix().cast<Complex>() * Xc - z * MatrixXcd::Identity(N, N)).inverse();
      worst = std::max({worst, (MatrixXcd(b.top_left()) - z * root * RM * root).cwiseAbs().maxCoeff(),
                        (MatrixXcd(b.bottom_right()) - RN).cwiseAbs().maxCoeff(), b.top_left_defect,
                        b.bottom_right_defect});
    }
    return Outcome{worst <= 1e-8, sfmt("max block defect %.2e over 50 instances (<= 1e-8)", worst)};
  });

  criterion("bottom-trace-rate", [] { return trace_rate(Law::BottomTrace, true); });
  criterion("top-trace-rate", [] { return trace_rate(Law::TopTrace, false); });

  criterion("interval-distance-rates", [] {
    std::string detail;
    bool ok = true;
    for (Law law : {Law::MuInterval, Law::NuInterval}) {
      ExperimentConfig c;
      c.law = law;
      c.psm = two_atoms;
      c.phi = 0.5;
      c.n_list = {128, 256, 512, 1024};
      c.replicates = 50;
      c.master_seed = 7;
      const auto t = run_experiment(c);
      const auto fit = fit_rate(t);
      ok = ok && fit.slope >= -1.3 && fit.slope <= -0.7 && t.failures.empty();
      detail += sfmt("%s slope=%.3f (se %.3f); ", to_string(law), fit.slope, fit.stderr_slope);
    }
    return Outcome{ok, detail + "range [-1.3, -0.7]"};
  });

  criterion("entrywise-local-law", [] {
    ExperimentConfig c;
    c.law = Law::Entrywise;
    c.phi = 0.5;
    c.z = {1.0, 1.0};
    c.n_list = {512};
    c.replicates = 20;
    c.master_seed = 11;
    const auto t = entrywise_pair_table(c);
    std::size_t within = 0;
    for (const auto& r : t.rows)
      if (r.value <= 10.0 * r.bound) ++within;
    const double frac = static_cast<double>(within) / static_cast<double>(t.rows.size());
    return Outcome{frac >= 0.95 && !t.rows.empty(),
                     sfmt("%zu/%zu (vector, seed) pairs within 10 Psi = %.1f%% (>= 95%%)", within,
                         t.rows.size(), 100.0 * frac)};
  });

  criterion("excess-loss", [] {
    ExperimentConfig c;
    c.law = Law::ExcessLoss;
    c.psm = two_atoms;
    c.phi = 0.5;
    c.n_list = {128, 256, 512, 1024};
    c.replicates = 50;
    c.master_seed = 13;
    const auto t = run_experiment(c);
    const auto fit = fit_rate(t);
    double min_median = 1e300;
    for (int n : c.n_list) min_median = std::min(min_median, median_of(t, n));
    const auto losses = loss_comparison(c);
    const bool ok = min_median >= -1e-9 && fit.slope >= -1.5 && fit.slope <= -0.5 &&
                    losses.optimality_violations == 0 && t.failures.empty();
    return Outcome{ok, sfmt("min median=%.3e, slope=%.3f (se %.3f), oracle violations=%d", min_median,
                             fit.slope, fit.stderr_slope, losses.optimality_violations)};
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
