#include "lpshrink/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "lpshrink/shrinkage.hpp"

namespace lpshrink {

namespace {

constexpr double kCoverageDensity = 1e-6;
constexpr double kQuadratureTol = 1e-10;
constexpr double kRangePad = 0.5;

double integrate(const std::function<double(double)>& f, double a, double b) {
  if (!(b > a)) return 0.0;
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  double error = 0.0;
  double l1 = 0.0;
  const double value = integrator.integrate(f, a, b, kQuadratureTol, &error, &l1);
  if (!std::isfinite(value)) throw NumericError("deterministic_mass: quadrature diverged");
  return value;
}

}  // namespace

void DeterministicMeasure::tabulate(double lo, double hi, int grid_points) {
  if (grid_points < 2) throw DomainError("deterministic measure: need >= 2 grid points");
  grid_.resize(static_cast<std::size_t>(grid_points));
  grid_density_.resize(grid_.size());
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    grid_[k] = lo + (hi - lo) * static_cast<double>(k) / (grid_points - 1);
    grid_density_[k] = density(grid_[k]);
    if (grid_density_[k] < 0.0) throw NumericError("deterministic measure: negative density");
  }
}

DeterministicMeasure DeterministicMeasure::esd_of_S(const PopulationSpectralMeasure& psm,
                                                    double phi, int grid_points) {
  DeterministicMeasure d;
  d.tag_ = Normalization::EsdOfS;
  d.phi_ = phi;
  d.atom_ = std::max(0.0, 1.0 - 1.0 / phi);
  d.support_ = support_edges(psm, phi);
  const auto schedule = default_eta_schedule();
  d.boundary_ = [psm, phi, schedule](double x) {
    const Complex m = boundary_value(x, psm, phi, schedule).m_check;
    return companion_to_esd(m, Complex{x, 0.0}, phi);
  };
  auto boundary = d.boundary_;
  d.density_ = [boundary](double x) {
    if (x == 0.0) return 0.0;
    return std::max(0.0, boundary(x).imag() / std::numbers::pi);
  };
  d.tabulate(std::max(0.0, d.support_.front().lower - kRangePad),
             d.support_.back().upper + kRangePad, grid_points);
  return d;
}

DeterministicMeasure DeterministicMeasure::companion(const PopulationSpectralMeasure& psm,
                                                     double phi, int grid_points) {
  DeterministicMeasure d;
  d.tag_ = Normalization::Companion;
  d.phi_ = phi;
  d.atom_ = std::max(0.0, 1.0 - phi);
  d.support_ = support_edges(psm, phi);
  const auto schedule = default_eta_schedule();
  d.boundary_ = [psm, phi, schedule](double x) {
    return boundary_value(x, psm, phi, schedule).m_check;
  };
  auto boundary = d.boundary_;
  d.density_ = [boundary](double x) {
    if (x == 0.0) return 0.0;
    return std::max(0.0, boundary(x).imag() / std::numbers::pi);
  };
  d.tabulate(std::max(0.0, d.support_.front().lower - kRangePad),
             d.support_.back().upper + kRangePad, grid_points);
  return d;
}

DeterministicMeasure DeterministicMeasure::from_density(std::function<double(double)> density,
                                                        std::vector<SupportInterval> support,
                                                        double atom_at_zero, Normalization tag,
                                                        double lo, double hi, int grid_points) {
  if (support.empty()) throw DomainError("deterministic measure: empty support");
  if (!(hi > lo)) throw DomainError("deterministic measure: need hi > lo");
  DeterministicMeasure d;
  d.tag_ = tag;
  d.atom_ = atom_at_zero;
  d.support_ = std::move(support);
  d.density_ = std::move(density);
  d.tabulate(lo, hi, grid_points);
  return d;
}

double DeterministicMeasure::density(double x) const { return density_(x); }

Complex DeterministicMeasure::boundary(double x) const {
  if (!boundary_) throw DomainError("deterministic measure: no boundary values available");
  return boundary_(x);
}

WeightFunction delta_weight(const DeterministicMeasure& esd) {
  if (esd.tag() != Normalization::EsdOfS) {
    throw DomainError("delta_weight: needs the distribution of S (esd_of_S)");
  }
  const double c = esd.phi();
  return [&esd, c](double x) {
    if (!(x > 0.0)) return 0.0;
    return delta(x, esd.boundary(x), c);
  };
}

std::pair<AtomicMeasure, AtomicMeasure> empirical_measures(const SampleEigensystem& eigensystem,
                                                           const PopulationCovariance& sigma) {
  const int M = eigensystem.dimension();
  if (eigensystem.vectors.cols() != M) {
    throw DomainError("empirical_measures: eigensystem without eigenvectors");
  }
  const VectorXd weights = oracle_weights(eigensystem.vectors, sigma);
  AtomicMeasure mu;
  mu.locations.assign(eigensystem.eigenvalues.data(), eigensystem.eigenvalues.data() + M);
  mu.weights.assign(static_cast<std::size_t>(M), 1.0 / M);
  return {std::move(mu), weighted_spectral_measure(eigensystem.eigenvalues, weights)};
}

AtomicMeasure weighted_spectral_measure(const VectorXd& eigenvalues, const VectorXd& weights) {
  if (eigenvalues.size() != weights.size()) {
    throw DomainError("weighted_spectral_measure: length mismatch");
  }
  const auto M = static_cast<double>(eigenvalues.size());
  AtomicMeasure nu;
  nu.locations.assign(eigenvalues.data(), eigenvalues.data() + eigenvalues.size());
  nu.weights.resize(nu.locations.size());
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    nu.weights[static_cast<std::size_t>(i)] = weights[i] / M;
  }
  return nu;
}

AtomicMeasure vector_measure(const SampleEigensystem& eigensystem, const VectorXd& x) {
  if (x.size() != eigensystem.dimension() || eigensystem.vectors.cols() != x.size()) {
    throw DomainError("vector_measure: dimension mismatch");
  }
  if (std::abs(x.norm() - 1.0) > 1e-10) {
    throw DomainError("vector_measure: x must be a unit vector");
  }
  const VectorXd overlaps = (eigensystem.vectors.transpose() * x).cwiseAbs2();
  AtomicMeasure out;
  out.locations.assign(eigensystem.eigenvalues.data(),
                       eigensystem.eigenvalues.data() + eigensystem.eigenvalues.size());
  out.weights.assign(overlaps.data(), overlaps.data() + overlaps.size());
  return out;
}

double deterministic_mass(const DeterministicMeasure& measure, Interval I,
                          const WeightFunction& weight) {
  if (!(I.b >= I.a)) throw DomainError("deterministic_mass: need a <= b");
  const auto& grid = measure.grid();
  if (I.a < grid.front() && measure.grid_density().front() > kCoverageDensity) {
    throw DomainError("deterministic_mass: interval extends below the tabulated range " +
                      std::to_string(grid.front()) + " where the density is nonzero");
  }
  if (I.b > grid.back() && measure.grid_density().back() > kCoverageDensity) {
    throw DomainError("deterministic_mass: interval extends above the tabulated range " +
                      std::to_string(grid.back()) + " where the density is nonzero");
  }
  auto integrand = [&](double x) {
    const double d = measure.density(x);
    return weight ? weight(x) * d : d;
  };
  double mass = 0.0;
  for (const auto& s : measure.support()) {
    mass += integrate(integrand, std::max(I.a, s.lower), std::min(I.b, s.upper));
  }
  if (measure.atom_at_zero() > 0.0 && I.a <= 0.0 && 0.0 < I.b) {
    mass += measure.atom_at_zero() * (weight ? weight(0.0) : 1.0);
  }
  return mass;
}

IntervalDistance::IntervalDistance(const DeterministicMeasure& measure,
                                   const WeightFunction& weight, int grid_size) {
  if (grid_size < 2) throw DomainError("interval distance: need grid_size >= 2");
  const double lo = measure.support().front().lower - 0.1;
  const double hi = measure.support().back().upper + 0.1;
  endpoints_.resize(static_cast<std::size_t>(grid_size));
  cumulative_.resize(endpoints_.size());
  for (std::size_t k = 0; k < endpoints_.size(); ++k) {
    endpoints_[k] = lo + (hi - lo) * static_cast<double>(k) / (grid_size - 1);
  }
  // Mass strictly below the first endpoint: support pieces and atom below it.
  const double start = std::min(lo, measure.grid().front());
  cumulative_[0] = start < lo ? deterministic_mass(measure, {start, lo}, weight) : 0.0;
  if (measure.atom_at_zero() > 0.0 && 0.0 < start) {
    cumulative_[0] += measure.atom_at_zero() * (weight ? weight(0.0) : 1.0);
  }
  for (std::size_t k = 1; k < endpoints_.size(); ++k) {
    cumulative_[k] = cumulative_[k - 1] +
                     deterministic_mass(measure, {endpoints_[k - 1], endpoints_[k]}, weight);
  }
}

double IntervalDistance::operator()(const AtomicMeasure& empirical) const {
  std::vector<std::size_t> order(empirical.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return empirical.locations[a] < empirical.locations[b];
  });
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double below = 0.0;
  std::size_t next = 0;
  for (std::size_t k = 0; k < endpoints_.size(); ++k) {
    while (next < order.size() && empirical.locations[order[next]] < endpoints_[k]) {
      below += empirical.weights[order[next]];
      ++next;
    }
    const double diff = below - cumulative_[k];
    lo = std::min(lo, diff);
    hi = std::max(hi, diff);
  }
  return hi - lo;
}

double interval_sup_distance(const AtomicMeasure& empirical, const DeterministicMeasure& measure,
                             const WeightFunction& weight, int grid_size) {
  return IntervalDistance(measure, weight, grid_size)(empirical);
}

}  // namespace lpshrink
