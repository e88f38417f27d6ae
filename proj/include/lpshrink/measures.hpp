#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "lpshrink/mp_law.hpp"
#include "lpshrink/spectral_core.hpp"

namespace lpshrink {

using WeightFunction = std::function<double(double)>;

/// Closed-open interval [a, b).
struct Interval {
  double a = 0.0;
  double b = 0.0;
};

enum class Normalization { Companion, EsdOfS };

/// Absolutely continuous limit measure with an optional atom at zero.
///
/// The density is evaluated on demand from boundary values of m; `grid` and
/// `grid_density` hold a tabulation for reporting and coverage checks.
class DeterministicMeasure {
 public:
  /// Limiting spectral distribution of S (M-normalized). Carries an atom of
  /// mass (1 - 1/phi)+ at zero.
  static DeterministicMeasure esd_of_S(const PopulationSpectralMeasure& psm, double phi,
                                       int grid_points = 400);
  /// Companion measure (N-normalized). Carries an atom of mass (1 - phi)+.
  static DeterministicMeasure companion(const PopulationSpectralMeasure& psm, double phi,
                                        int grid_points = 400);
  /// Arbitrary density supported on `support`, tabulated on [lo, hi].
  static DeterministicMeasure from_density(std::function<double(double)> density,
                                           std::vector<SupportInterval> support,
                                           double atom_at_zero, Normalization tag, double lo,
                                           double hi, int grid_points = 400);

  double density(double x) const;
  /// Boundary value of the Stieltjes transform of this measure at x (only for
  /// measures built from a population spectral measure).
  Complex boundary(double x) const;

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& grid_density() const noexcept { return grid_density_; }
  const std::vector<SupportInterval>& support() const noexcept { return support_; }
  double atom_at_zero() const noexcept { return atom_; }
  Normalization tag() const noexcept { return tag_; }
  double phi() const noexcept { return phi_; }

 private:
  DeterministicMeasure() = default;
  void tabulate(double lo, double hi, int grid_points);

  std::function<double(double)> density_;
  std::function<Complex(double)> boundary_;
  std::vector<double> grid_;
  std::vector<double> grid_density_;
  std::vector<SupportInterval> support_;
  double atom_ = 0.0;
  Normalization tag_ = Normalization::EsdOfS;
  double phi_ = 0.0;
};

/// The shrinkage function delta on the support of an esd_of_S measure,
/// evaluated from the measure's own boundary values (c = phi).
WeightFunction delta_weight(const DeterministicMeasure& esd);

/// mu_hat = (1/M) sum delta_lambda_i and nu_hat = (1/M) sum (u_i* Sigma u_i) delta_lambda_i.
std::pair<AtomicMeasure, AtomicMeasure> empirical_measures(const SampleEigensystem& eigensystem,
                                                           const PopulationCovariance& sigma);

/// Measure built from precomputed oracle weights (for callers that already
/// have them): weights a_i / M at lambda_i.
AtomicMeasure weighted_spectral_measure(const VectorXd& eigenvalues, const VectorXd& weights);

/// sum |u_i* x|^2 delta_lambda_i. Throws DomainError unless |x| = 1.
AtomicMeasure vector_measure(const SampleEigensystem& eigensystem, const VectorXd& x);

/// int_I weight * density plus the atom at zero when 0 lies in I. Integration
/// is adaptive (tanh-sinh per support piece). Throws DomainError when I leaves
/// the tabulated range while the density at that boundary is nonzero.
double deterministic_mass(const DeterministicMeasure& measure, Interval I,
                          const WeightFunction& weight = nullptr);

/// Sup over intervals with endpoints on a fixed uniform grid of
/// |empirical(I) - deterministic(I)|. Deterministic cumulative masses are
/// computed once at construction; each call is O(grid + atoms log atoms).
class IntervalDistance {
 public:
  /// The grid spans [lowest edge - 0.1, highest edge + 0.1].
  IntervalDistance(const DeterministicMeasure& measure, const WeightFunction& weight,
                   int grid_size);

  double operator()(const AtomicMeasure& empirical) const;

  const std::vector<double>& endpoints() const noexcept { return endpoints_; }
  const std::vector<double>& cumulative() const noexcept { return cumulative_; }

 private:
  std::vector<double> endpoints_;
  std::vector<double> cumulative_;  // deterministic mass of (-inf, p_k)
};

double interval_sup_distance(const AtomicMeasure& empirical, const DeterministicMeasure& measure,
                             const WeightFunction& weight, int grid_size);

}  // namespace lpshrink
