#include "lpshrink/mp_law.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace lpshrink {

namespace {

constexpr int kFixedPointWarmup = 5;
constexpr double kDamping = 0.5;
constexpr double kExtrapolationTol = 1e-6;

void require_valid(double phi) {
  if (!(phi > 0.0) || !std::isfinite(phi)) {
    throw DomainError("solve_m: phi must be finite and > 0");
  }
}

// One step of m -> 1 / (-z + phi * int x / (1 + m x) dpi).
Complex fixed_point_map(Complex m, Complex z, const PopulationSpectralMeasure& psm,
                        double phi) {
  Complex integral{0.0, 0.0};
  for (const auto& a : psm.atoms()) integral += a.weight * a.tau / (1.0 + m * a.tau);
  return 1.0 / (-z + phi * integral);
}

struct Iteration {
  Complex m;
  double residual;
  int iterations;
  bool converged;
};

Iteration iterate(Complex z, const PopulationSpectralMeasure& psm, double phi,
                  const SolverOptions& options, Complex m0) {
  const double scale = std::max(1.0, std::abs(z));
  auto residual = [&](Complex m) {
    return std::abs(mp_root_function(m, psm, phi) - z) / scale;
  };
  Complex m = m0;
  double r = residual(m);
  int it = 0;
  for (; it < options.max_iterations && !(r <= options.tol); ++it) {
    bool accepted = false;
    if (it >= kFixedPointWarmup || r < 1e-2) {
      const Complex slope = mp_root_function_derivative(m, psm, phi);
      if (std::abs(slope) > 0.0 && std::isfinite(std::abs(slope))) {
        const Complex step = (mp_root_function(m, psm, phi) - z) / slope;
        double t = 1.0;
        for (int b = 0; b < 10 && !accepted; ++b, t *= 0.5) {
          const Complex candidate = m - t * step;
          if (!(candidate.imag() > 0.0)) continue;
          const double rc = residual(candidate);
          if (rc < r) {
            m = candidate;
            r = rc;
            accepted = true;
          }
        }
      }
    }
    if (!accepted) {
      const Complex next = fixed_point_map(m, z, psm, phi);
      m = (1.0 - kDamping) * m + kDamping * next;
      if (m.imag() <= 0.0) m = std::conj(m);
      if (m.imag() == 0.0) m += Complex{0.0, std::numeric_limits<double>::min()};
      r = residual(m);
    }
  }
  const bool converged = r <= options.tol;
  if (converged) {
    // Polish: Newton steps while they keep shrinking, so |m - m_exact| sits
    // at rounding level even where |f'| is small.
    double last_step = std::numeric_limits<double>::infinity();
    for (int p = 0; p < 4; ++p) {
      const Complex slope = mp_root_function_derivative(m, psm, phi);
      if (!(std::abs(slope) > 0.0)) break;
      const Complex step = (mp_root_function(m, psm, phi) - z) / slope;
      const double size = std::abs(step);
      if (!(size < last_step) || !std::isfinite(size)) break;
      const Complex candidate = m - step;
      if (!(candidate.imag() > 0.0)) break;
      const double rc = residual(candidate);
      if (rc > std::max(r, options.tol)) break;
      m = candidate;
      r = rc;
      last_step = size;
      if (size <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(m)) break;
    }
  }
  return {m, r, it, converged};
}

}  // namespace

Complex mp_root_function(Complex m, const PopulationSpectralMeasure& psm, double phi) {
  Complex sum{0.0, 0.0};
  for (const auto& a : psm.atoms()) sum += a.weight / (m + 1.0 / a.tau);
  return -1.0 / m + phi * sum;
}

Complex mp_root_function_derivative(Complex m, const PopulationSpectralMeasure& psm,
                                    double phi) {
  Complex sum{0.0, 0.0};
  for (const auto& a : psm.atoms()) {
    const Complex d = m + 1.0 / a.tau;
    sum += a.weight / (d * d);
  }
  return 1.0 / (m * m) - phi * sum;
}

StieltjesSolution solve_m(Complex z, const PopulationSpectralMeasure& psm, double phi,
                          const SolverOptions& options, std::optional<Complex> initial) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    throw DomainError("solve_m: z must be finite");
  }
  if (!(z.imag() > 0.0)) {
    throw DomainError("solve_m: need eta > 0, got eta = " + std::to_string(z.imag()));
  }
  require_valid(phi);
  if (!(options.tol > 0.0) || options.max_iterations < 1) {
    throw DomainError("solve_m: need tol > 0 and max_iterations >= 1");
  }
  Complex m0 = -1.0 / z;
  if (initial && initial->imag() > 0.0 && std::isfinite(std::abs(*initial))) {
    m0 = *initial;
  }
  auto attempt = iterate(z, psm, phi, options, m0);
  int total = attempt.iterations;
  if (!attempt.converged && !initial) {
    // Continuation in eta from a well-conditioned height down to z.
    double eta = std::max(1.0, 10.0 * z.imag());
    Complex m = -1.0 / Complex{z.real(), eta};
    bool ok = true;
    while (ok) {
      const Complex zz{z.real(), eta};
      auto step = iterate(zz, psm, phi, options, m);
      total += step.iterations;
      ok = step.converged;
      m = step.m;
      if (eta == z.imag()) {
        attempt = step;
        break;
      }
      eta = std::max(z.imag(), eta / 10.0);
    }
  }
  if (!attempt.converged) {
    throw SolverError("solve_m: no convergence at z = (" + std::to_string(z.real()) +
                          ", " + std::to_string(z.imag()) + "), residual " +
                          std::to_string(attempt.residual),
                      attempt.m, attempt.residual, total);
  }
  return StieltjesSolution{z, attempt.m, attempt.residual, total};
}

std::vector<double> default_eta_schedule() { return {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}; }

BoundaryValue boundary_value(double E, const PopulationSpectralMeasure& psm, double phi,
                             const std::vector<double>& eta_schedule) {
  if (eta_schedule.empty()) throw DomainError("boundary_value: empty eta schedule");
  for (std::size_t k = 0; k < eta_schedule.size(); ++k) {
    if (!(eta_schedule[k] > 0.0) || (k > 0 && !(eta_schedule[k] < eta_schedule[k - 1]))) {
      throw DomainError("boundary_value: eta schedule must be positive and decreasing");
    }
  }
  std::vector<Complex> ms;
  std::optional<Complex> warm;
  for (double eta : eta_schedule) {
    const auto sol = solve_m({E, eta}, psm, phi, SolverOptions{}, warm);
    ms.push_back(sol.m);
    warm = sol.m;
  }
  auto extrapolate = [&](std::size_t k) {
    // Line through (eta_{k-1}, m_{k-1}) and (eta_k, m_k), evaluated at 0.
    const double e0 = eta_schedule[k - 1];
    const double e1 = eta_schedule[k];
    return ms[k] - (ms[k - 1] - ms[k]) * (e1 / (e0 - e1));
  };
  BoundaryValue out;
  out.E = E;
  const std::size_t K = ms.size();
  if (K == 1) {
    out.m_check = ms[0];
  } else {
    out.m_check = extrapolate(K - 1);
    if (K >= 3) out.uncertainty = std::abs(out.m_check - extrapolate(K - 2));
    else out.uncertainty = std::abs(out.m_check - ms[K - 1]);
  }
  if (out.m_check.imag() < 0.0) out.m_check.imag(0.0);
  out.flagged = out.uncertainty > kExtrapolationTol * std::max(1.0, std::abs(out.m_check));
  return out;
}

Complex BoundaryProfile::m_check_S(std::size_t i) const {
  return {std::numbers::pi * hilbert_w_S[i], std::numbers::pi * w_S[i]};
}

Complex companion_to_esd(Complex m, Complex z, double phi) {
  return (m + (1.0 - phi) / z) / phi;
}

namespace {

double companion_density(double E, const PopulationSpectralMeasure& psm, double phi,
                         const std::vector<double>& schedule) {
  return boundary_value(E, psm, phi, schedule).m_check.imag() / std::numbers::pi;
}

// Bisects the transition of w across kEdgeDensityThreshold inside [lo, hi],
// where `lo_inside` says which side carries density.
double bisect_edge(double lo, double hi, bool lo_inside,
                   const PopulationSpectralMeasure& psm, double phi,
                   const std::vector<double>& schedule) {
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    const bool inside = companion_density(mid, psm, phi, schedule) > kEdgeDensityThreshold;
    if (inside == lo_inside) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<SupportInterval> scan_edges(const std::vector<double>& E,
                                        const std::vector<double>& w,
                                        const PopulationSpectralMeasure& psm, double phi,
                                        const std::vector<double>& schedule) {
  std::vector<SupportInterval> edges;
  bool inside = false;
  double start = 0.0;
  for (std::size_t i = 0; i < E.size(); ++i) {
    const bool now = w[i] > kEdgeDensityThreshold;
    if (now && !inside) {
      start = i == 0 ? E[0] : bisect_edge(E[i - 1], E[i], false, psm, phi, schedule);
    } else if (!now && inside) {
      edges.push_back({start, bisect_edge(E[i - 1], E[i], true, psm, phi, schedule)});
    }
    inside = now;
  }
  if (inside) edges.push_back({start, E.back()});
  return edges;
}

}  // namespace

BoundaryProfile boundary_profile(const std::vector<double>& E_grid,
                                 const PopulationSpectralMeasure& psm, double phi,
                                 const std::vector<double>& eta_schedule) {
  require_valid(phi);
  if (E_grid.empty()) throw DomainError("boundary_profile: empty grid");
  for (std::size_t i = 1; i < E_grid.size(); ++i) {
    if (!(E_grid[i] > E_grid[i - 1])) {
      throw DomainError("boundary_profile: E grid must be strictly increasing");
    }
  }
  if (eta_schedule.empty() || eta_schedule.back() > 1e-6) {
    throw DomainError("boundary_profile: eta schedule must decrease to <= 1e-6");
  }
  BoundaryProfile p;
  p.phi = phi;
  p.atom_at_zero = std::max(0.0, 1.0 - phi);
  const std::size_t K = E_grid.size();
  p.E = E_grid;
  p.m_check.resize(K);
  p.w.resize(K);
  p.hilbert_w.resize(K);
  p.w_S.resize(K);
  p.hilbert_w_S.resize(K);
  p.uncertainty.resize(K);
  p.flagged.resize(K);
  constexpr double pi = std::numbers::pi;
  for (std::size_t i = 0; i < K; ++i) {
    const double E = E_grid[i];
    if (std::abs(E) <= 1e-12 && p.atom_at_zero > 0.0) {
      // The companion atom at zero makes m blow up; its mass is reported
      // separately through atom_at_zero.
      const double nan = std::numeric_limits<double>::quiet_NaN();
      p.m_check[i] = {nan, nan};
      p.flagged[i] = true;
      p.uncertainty[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    const auto bv = boundary_value(E, psm, phi, eta_schedule);
    p.m_check[i] = bv.m_check;
    p.uncertainty[i] = bv.uncertainty;
    p.flagged[i] = bv.flagged;
    p.w[i] = std::max(0.0, bv.m_check.imag() / pi);
    p.hilbert_w[i] = bv.m_check.real() / pi;
    if (E != 0.0) {
      const Complex mS = companion_to_esd(bv.m_check, Complex{E, 0.0}, phi);
      p.w_S[i] = std::max(0.0, mS.imag() / pi);
      p.hilbert_w_S[i] = mS.real() / pi;
    } else {
      p.w_S[i] = p.w[i] / phi;
      p.hilbert_w_S[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  p.edges = scan_edges(p.E, p.w, psm, phi, eta_schedule);
  return p;
}

std::vector<SupportInterval> support_edges(const PopulationSpectralMeasure& psm,
                                           double phi, int scan_points) {
  require_valid(phi);
  if (scan_points < 2) throw DomainError("support_edges: need >= 2 scan points");
  const double upper = 1.05 * std::pow(1.0 + std::sqrt(phi), 2) * psm.max_tau();
  const auto schedule = default_eta_schedule();
  std::vector<double> E(static_cast<std::size_t>(scan_points));
  std::vector<double> w(E.size());
  for (std::size_t i = 0; i < E.size(); ++i) {
    E[i] = upper * static_cast<double>(i + 1) / static_cast<double>(scan_points);
    w[i] = companion_density(E[i], psm, phi, schedule);
  }
  return scan_edges(E, w, psm, phi, schedule);
}

LocalLawBound psi(Complex z, Complex m, int N) {
  if (!(z.imag() > 0.0)) throw DomainError("psi: need eta > 0");
  if (N < 1) throw DomainError("psi: need N >= 1");
  if (m.imag() < 0.0) throw DomainError("psi: need Im m >= 0");
  const double n_eta = N * z.imag();
  return LocalLawBound{z, m, N, std::sqrt(m.imag() / n_eta) + 1.0 / n_eta};
}

}  // namespace lpshrink
