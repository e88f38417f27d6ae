#pragma once

#include <cmath>
#include <optional>
#include <vector>

// Boost 1.74's pchip calls isnan unqualified; make std::isnan visible to it.
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>

#include "lpshrink/mp_law.hpp"
#include "lpshrink/spectral_core.hpp"

namespace lpshrink {

enum class EstimateKind { Oracle, Delta, Sample, Scalar };

const char* to_string(EstimateKind kind) noexcept;

/// Rotation-equivariant estimate U diag(dhat) U*.
struct ShrinkageEstimate {
  MatrixXd frame;
  VectorXd dhat;
  EstimateKind kind = EstimateKind::Sample;
  double beta = 1.0;

  MatrixXd matrix() const;
  int dimension() const noexcept { return static_cast<int>(dhat.size()); }
};

struct LossReport {
  double mv_loss = 0.0;
  std::optional<double> frobenius_loss;  // Tr((Sigma_hat - Sigma)^2) / N
};

/// delta(x) = x / ([c x Im m]^2 + [1 - c - c x Re m]^2), where m = pi (H w + i w)
/// is the boundary value of the Stieltjes transform of the limiting spectral
/// distribution of S. Throws DomainError for x <= 0 and NumericError when the
/// denominator drops below 1e-14.
double delta(double x, Complex m_check_S, double c);

/// The same function written through the companion boundary value:
/// delta(x) = 1 / (x |m_companion(x)|^2).
double delta_companion(double x, Complex m_check_companion);

/// u_i* Sigma u_i for every column of U.
VectorXd oracle_weights(const MatrixXd& U, const PopulationCovariance& sigma);

/// D^or = diag(u_i* Sigma u_i).
ShrinkageEstimate oracle_shrink(const MatrixXd& U, const PopulationCovariance& sigma);

/// Boundary profile suited to shrinkage: `points` grid nodes distributed over
/// the support intervals, endpoints included.
BoundaryProfile shrinkage_profile(const PopulationSpectralMeasure& psm, double phi,
                                  int points = 800);

/// Monotone cubic (PCHIP) interpolant of delta over each support interval of a
/// profile. Arguments outside the support are clamped to the nearest interval.
class DeltaCurve {
 public:
  DeltaCurve(const BoundaryProfile& profile, double c);

  double operator()(double x) const;
  /// Nearest point of the support.
  double clamp(double x) const;
  bool in_support(double x) const;

  const std::vector<SupportInterval>& support() const noexcept { return support_; }
  double c() const noexcept { return c_; }
  /// Grid nodes and delta values backing the interpolant (all intervals).
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  double c_;
  std::vector<SupportInterval> support_;
  std::vector<boost::math::interpolators::pchip<std::vector<double>>> pieces_;
  std::vector<double> nodes_;
  std::vector<double> values_;
};

struct DeltaShrinkResult {
  VectorXd dhat;
  int clamped_count = 0;  // eigenvalues outside the support (clamped)
  int flagged_count = 0;  // eigenvalues beyond the outlier margin
};

/// Margin beyond the support edges past which an eigenvalue is flagged:
/// upper edge * N^{-1/3}.
double outlier_margin(const DeltaCurve& curve, int N);

/// delta(lambda_i) for a bare spectrum (clamping, flags and logging).
DeltaShrinkResult delta_shrink_spectrum(const VectorXd& eigenvalues,
                                        const DeltaCurve& curve, int N);

/// Sigma_tilde = sum delta(lambda_i) u_i u_i*.
ShrinkageEstimate delta_shrink(const SampleEigensystem& eigensystem,
                               const DeltaCurve& curve, int N,
                               DeltaShrinkResult* details = nullptr);

/// MV loss with every trace divided by N:
///   [Tr(S^-1 Sigma S^-1)/N] / [Tr(S^-1)/N]^2 - 1 / [Tr(Sigma^-1)/N],
/// S the estimate. Throws DomainError unless every dhat is > 0.
LossReport mv_loss(const ShrinkageEstimate& estimate, const PopulationCovariance& sigma,
                   int N, bool with_frobenius = false);

/// Overload taking precomputed oracle weights u_i* Sigma u_i (same frame).
double mv_loss(const VectorXd& dhat, const VectorXd& oracle, double sigma_inverse_trace,
               int N);

/// Comparison baselines: the raw sample estimate (dhat = lambda) and the
/// scalar estimate dhat = trace_estimate / M (trace(S) / M by default).
std::vector<ShrinkageEstimate> baseline_estimates(
    const SampleEigensystem& eigensystem,
    std::optional<double> sigma_trace_estimate = std::nullopt);

}  // namespace lpshrink
