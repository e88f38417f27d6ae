#include "lpshrink/shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

namespace lpshrink {

const char* to_string(EstimateKind kind) noexcept {
  switch (kind) {
    case EstimateKind::Oracle: return "oracle";
    case EstimateKind::Delta: return "delta";
    case EstimateKind::Sample: return "sample";
    case EstimateKind::Scalar: return "scalar";
  }
  return "unknown";
}

MatrixXd ShrinkageEstimate::matrix() const {
  return beta * frame * dhat.asDiagonal() * frame.transpose();
}

double delta(double x, Complex m_check_S, double c) {
  if (!(x > 0.0)) throw DomainError("delta: need x > 0, got " + std::to_string(x));
  // pi * w = Im m and pi * Hw = Re m.
  const double a = c * x * m_check_S.imag();
  const double b = 1.0 - c - c * x * m_check_S.real();
  const double denom = a * a + b * b;
  if (!(denom >= 1e-14)) {
    throw NumericError("delta: denominator " + std::to_string(denom) + " at x = " +
                       std::to_string(x));
  }
  return x / denom;
}

double delta_companion(double x, Complex m_check_companion) {
  if (!(x > 0.0)) throw DomainError("delta_companion: need x > 0");
  const double denom = x * std::norm(m_check_companion);
  if (!(denom >= 1e-14)) throw NumericError("delta_companion: singular denominator");
  return 1.0 / denom;
}

VectorXd oracle_weights(const MatrixXd& U, const PopulationCovariance& sigma) {
  if (U.rows() != sigma.dimension()) {
    throw DomainError("oracle weights: U has " + std::to_string(U.rows()) +
                      " rows, Sigma is " + std::to_string(sigma.dimension()));
  }
  if (sigma.is_diagonal()) {
    return (sigma.eigenvalues().asDiagonal() * U.cwiseAbs2()).colwise().sum().transpose();
  }
  return (U.transpose() * sigma.matrix() * U).diagonal();
}

ShrinkageEstimate oracle_shrink(const MatrixXd& U, const PopulationCovariance& sigma) {
  return ShrinkageEstimate{U, oracle_weights(U, sigma), EstimateKind::Oracle, 1.0};
}

BoundaryProfile shrinkage_profile(const PopulationSpectralMeasure& psm, double phi,
                                  int points) {
  if (points < 8) throw DomainError("shrinkage_profile: need >= 8 points");
  const auto support = support_edges(psm, phi);
  if (support.empty()) throw NumericError("shrinkage_profile: no support found");
  double total = 0.0;
  for (const auto& s : support) total += s.upper - s.lower;
  std::vector<double> grid;
  for (const auto& s : support) {
    const int n = std::max(8, static_cast<int>(std::lround(points * (s.upper - s.lower) / total)));
    for (int k = 0; k < n; ++k) {
      grid.push_back(s.lower + (s.upper - s.lower) * k / (n - 1));
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return boundary_profile(grid, psm, phi);
}

DeltaCurve::DeltaCurve(const BoundaryProfile& profile, double c) : c_(c) {
  if (profile.edges.empty()) throw DomainError("delta curve: profile has no support");
  constexpr double slack = 1e-6;
  for (const auto& edge : profile.edges) {
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < profile.size(); ++i) {
      const double E = profile.E[i];
      if (E < edge.lower - slack || E > edge.upper + slack || !(E > 0.0)) continue;
      x.push_back(E);
      y.push_back(delta(E, profile.m_check_S(i), c));
    }
    if (x.size() < 4) {
      throw DomainError("delta curve: fewer than 4 grid points in support interval [" +
                        std::to_string(edge.lower) + ", " + std::to_string(edge.upper) + "]");
    }
    support_.push_back({x.front(), x.back()});
    nodes_.insert(nodes_.end(), x.begin(), x.end());
    values_.insert(values_.end(), y.begin(), y.end());
    pieces_.emplace_back(std::move(x), std::move(y));
  }
}

bool DeltaCurve::in_support(double x) const {
  return std::any_of(support_.begin(), support_.end(),
                     [x](const SupportInterval& s) { return x >= s.lower && x <= s.upper; });
}

double DeltaCurve::clamp(double x) const {
  double best = x;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& s : support_) {
    const double c = std::clamp(x, s.lower, s.upper);
    if (std::abs(c - x) < best_dist) {
      best_dist = std::abs(c - x);
      best = c;
    }
  }
  return best;
}

double DeltaCurve::operator()(double x) const {
  const double xc = clamp(x);
  for (std::size_t k = 0; k < support_.size(); ++k) {
    if (xc >= support_[k].lower && xc <= support_[k].upper) return pieces_[k](xc);
  }
  return pieces_.back()(support_.back().upper);
}

double outlier_margin(const DeltaCurve& curve, int N) {
  return curve.support().back().upper * std::pow(static_cast<double>(N), -1.0 / 3.0);
}

DeltaShrinkResult delta_shrink_spectrum(const VectorXd& eigenvalues, const DeltaCurve& curve,
                                        int N) {
  if (N < 1) throw DomainError("delta_shrink: need N >= 1");
  DeltaShrinkResult out;
  out.dhat.resize(eigenvalues.size());
  const double margin = outlier_margin(curve, N);
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const double lambda = eigenvalues[i];
    if (!curve.in_support(lambda)) {
      ++out.clamped_count;
      if (std::abs(curve.clamp(lambda) - lambda) > margin) ++out.flagged_count;
    }
    out.dhat[i] = curve(lambda);
  }
  if (out.flagged_count > 0) {
    spdlog::warn("delta_shrink: {} eigenvalue(s) farther than {:.4g} outside the support; "
                 "clamped to the nearest edge",
                 out.flagged_count, margin);
  }
  return out;
}

ShrinkageEstimate delta_shrink(const SampleEigensystem& eigensystem, const DeltaCurve& curve,
                               int N, DeltaShrinkResult* details) {
  auto result = delta_shrink_spectrum(eigensystem.eigenvalues, curve, N);
  ShrinkageEstimate est{eigensystem.vectors, result.dhat, EstimateKind::Delta, 1.0};
  if (details) *details = std::move(result);
  return est;
}

double mv_loss(const VectorXd& dhat, const VectorXd& oracle, double sigma_inverse_trace,
               int N) {
  if (dhat.size() != oracle.size()) throw DomainError("mv_loss: dimension mismatch");
  if (N < 1) throw DomainError("mv_loss: need N >= 1");
  if ((dhat.array() <= 0.0).any() || !dhat.allFinite()) {
    throw DomainError("mv_loss: estimate is singular (non-positive eigenvalue)");
  }
  const double n = static_cast<double>(N);
  const VectorXd inv = dhat.cwiseInverse();
  const double numerator = oracle.dot(inv.cwiseAbs2()) / n;
  const double inv_trace = inv.sum() / n;
  return numerator / (inv_trace * inv_trace) - 1.0 / (sigma_inverse_trace / n);
}

LossReport mv_loss(const ShrinkageEstimate& estimate, const PopulationCovariance& sigma, int N,
                   bool with_frobenius) {
  if (estimate.frame.rows() != sigma.dimension() ||
      estimate.frame.cols() != estimate.dhat.size()) {
    throw DomainError("mv_loss: estimate and Sigma dimensions disagree");
  }
  if (!(estimate.beta > 0.0)) throw DomainError("mv_loss: need beta > 0");
  const VectorXd dhat = estimate.beta * estimate.dhat;
  LossReport report;
  report.mv_loss = mv_loss(dhat, oracle_weights(estimate.frame, sigma), sigma.inverse_trace(), N);
  if (with_frobenius) {
    report.frobenius_loss = (estimate.matrix() - sigma.matrix()).squaredNorm() / N;
  }
  return report;
}

std::vector<ShrinkageEstimate> baseline_estimates(const SampleEigensystem& eigensystem,
                                                  std::optional<double> sigma_trace_estimate) {
  const auto M = eigensystem.dimension();
  if (M == 0 || eigensystem.vectors.cols() != M) {
    throw DomainError("baseline_estimates: eigensystem without eigenvectors");
  }
  const double trace = sigma_trace_estimate.value_or(eigensystem.eigenvalues.sum());
  std::vector<ShrinkageEstimate> out;
  out.push_back({eigensystem.vectors, eigensystem.eigenvalues, EstimateKind::Sample, 1.0});
  out.push_back({eigensystem.vectors, VectorXd::Constant(M, trace / M), EstimateKind::Scalar, 1.0});
  return out;
}

}  // namespace lpshrink
