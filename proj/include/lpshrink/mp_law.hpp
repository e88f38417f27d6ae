#pragma once

#include <optional>
#include <vector>

#include "lpshrink/spectral_core.hpp"

namespace lpshrink {

/// Solver settings for the self-consistent equation. Residuals are measured
/// as |f(m) - z| / max(1, |z|).
struct SolverOptions {
  double tol = 1e-12;
  int max_iterations = 500;
};

struct StieltjesSolution {
  Complex z;
  Complex m;
  double residual = 0.0;
  int iterations = 0;
};

/// f(m) = -1/m + phi * sum_k w_k / (m + 1/tau_k). The Stieltjes transform m(z)
/// of the companion limit is the unique root of f(m) = z in the upper
/// half-plane.
Complex mp_root_function(Complex m, const PopulationSpectralMeasure& psm, double phi);

/// Derivative of mp_root_function with respect to m.
Complex mp_root_function_derivative(Complex m, const PopulationSpectralMeasure& psm,
                                    double phi);

/// Solves 1/m = -z + phi * int x/(1 + m x) dpi(x) for m in the upper half-plane.
/// Damped fixed-point iteration from m0 = -1/z, switching to safeguarded Newton
/// on f(m) - z once the residual is small. `initial` overrides m0 (used for
/// continuation in eta). Throws DomainError for eta <= 0 and SolverError when
/// the iteration budget runs out.
StieltjesSolution solve_m(Complex z, const PopulationSpectralMeasure& psm, double phi,
                          const SolverOptions& options = {},
                          std::optional<Complex> initial = std::nullopt);

/// The default eta schedule {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}.
std::vector<double> default_eta_schedule();

/// Boundary value of m on the real axis at E.
struct BoundaryValue {
  double E = 0.0;
  Complex m_check;
  double uncertainty = 0.0;  // disagreement between successive extrapolations
  bool flagged = false;      // uncertainty above the extrapolation tolerance
};

/// Solves at E + i*eta down the schedule (warm-started), then extrapolates
/// linearly in eta to 0 on the real and imaginary parts. Points whose last two
/// extrapolations disagree by more than 1e-6 (relative) are flagged.
BoundaryValue boundary_value(double E, const PopulationSpectralMeasure& psm,
                             double phi, const std::vector<double>& eta_schedule);

struct SupportInterval {
  double lower;
  double upper;
};

/// Boundary data on a grid. `w`/`hilbert_w` describe the companion measure
/// (N-normalized, atom (1-phi)+ at zero): m_check = pi (H w + i w).
/// `w_S`/`hilbert_w_S` describe the limiting spectral distribution of S
/// (M-normalized): w = phi w_S for E > 0.
struct BoundaryProfile {
  double phi = 0.0;
  std::vector<double> E;
  std::vector<Complex> m_check;
  std::vector<double> w;
  std::vector<double> hilbert_w;
  std::vector<double> w_S;
  std::vector<double> hilbert_w_S;
  std::vector<double> uncertainty;
  std::vector<bool> flagged;
  std::vector<SupportInterval> edges;
  double atom_at_zero = 0.0;

  std::size_t size() const noexcept { return E.size(); }
  /// Boundary value of the Stieltjes transform of the distribution of S at
  /// grid point i: pi (H w_S + i w_S).
  Complex m_check_S(std::size_t i) const;
};

/// Density threshold used for support-edge detection.
inline constexpr double kEdgeDensityThreshold = 1e-4;

/// Fills a BoundaryProfile on a strictly increasing E grid. Support edges are
/// located by scanning w > kEdgeDensityThreshold on the grid and bisecting
/// each transition to 1e-8.
BoundaryProfile boundary_profile(const std::vector<double>& E_grid,
                                 const PopulationSpectralMeasure& psm, double phi,
                                 const std::vector<double>& eta_schedule =
                                     default_eta_schedule());

/// Support intervals of the limiting distribution, bracketed from
/// [0, (1 + sqrt(phi))^2 max tau] on a `scan_points` grid then bisected.
std::vector<SupportInterval> support_edges(const PopulationSpectralMeasure& psm,
                                           double phi, int scan_points = 2000);

/// Psi(z) = sqrt(Im m / (N eta)) + 1 / (N eta).
struct LocalLawBound {
  Complex z;
  Complex m;
  int N = 0;
  double psi = 0.0;
};

LocalLawBound psi(Complex z, Complex m, int N);

/// Conversions between the companion Stieltjes transform m and the Stieltjes
/// transform of the distribution of S: m = -(1 - phi)/z + phi m_S.
Complex companion_to_esd(Complex m, Complex z, double phi);

}  // namespace lpshrink
