#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lpshrink/spectral_core.hpp"

namespace lpshrink {

/// Linearized Green function of the sample covariance problem.
///
/// H = [[-Sigma^{-1}, X], [X*, -z I]] over the index set I_M (labels 0..M-1)
/// followed by I_N (labels M..M+N-1), and G = H^{-1}. The blocks reproduce the
/// two ordinary resolvents:
///   top-left     = z Sigma^{1/2} R_M Sigma^{1/2},  R_M = (S - z)^{-1}
///   bottom-right = R_N = (X* Sigma X - z)^{-1}
/// Both are computed independently by direct inversion and compared at build
/// time; the defects are stored.
struct ResolventBundle {
  Complex z;
  int M = 0;
  int N = 0;
  MatrixXcd X;
  MatrixXcd H;
  MatrixXcd G;
  MatrixXcd R_M;
  MatrixXcd R_N;
  std::vector<IndexedMatrix::Label> index_M;
  std::vector<IndexedMatrix::Label> index_N;
  bool diagonal_sigma = true;
  double inverse_defect = 0.0;       // max |G H - I|
  double top_left_defect = 0.0;      // max |G_MM - z Sigma^{1/2} R_M Sigma^{1/2}|
  double bottom_right_defect = 0.0;  // max |G_NN - R_N|

  auto top_left() const { return G.topLeftCorner(M, M); }
  auto bottom_right() const { return G.bottomRightCorner(N, N); }
  IndexedMatrix indexed_G() const;
};

/// Throws DomainError for eta <= 0 or mismatched dimensions, NumericError if
/// H is numerically singular (reciprocal condition estimate below 1e-14).
ResolventBundle build_bundle(Complex z, const MatrixXcd& X, const PopulationCovariance& sigma);
ResolventBundle build_bundle(Complex z, const MatrixXd& X, const PopulationCovariance& sigma);

/// Pi(z) = diag(-Sigma (I + m Sigma)^{-1}, m I).
struct DeterministicApprox {
  Complex z;
  Complex m;
  int M = 0;
  int N = 0;
  MatrixXcd Pi;

  auto top_left() const { return Pi.topLeftCorner(M, M); }
};

/// Throws NumericError if |1 + m tau_i| < 1e-12 for some i.
DeterministicApprox build_pi(Complex z, Complex m, const PopulationCovariance& sigma, int N);

/// Theta(z) = Tr((S - z)^{-1} g(Sigma)), evaluated by a linear solve.
Complex theta(Complex z, const MatrixXd& S, const PopulationCovariance& sigma,
              const std::function<double(double)>& g);

/// The same quantity from its spectral definition
///   sum_{i,j} (lambda_i - z)^{-1} |u_i* v_j|^2 g(tau_j).
Complex theta_double_sum(Complex z, const SampleEigensystem& eigensystem,
                         const PopulationCovariance& sigma,
                         const std::function<double(double)>& g);

/// N^{-1} Tr R_N - m, from the bundle's bottom-right block.
Complex trace_residual_bottom(const ResolventBundle& bundle, Complex m);

/// Same residual from the spectrum of S: the nonzero spectra of S and
/// X* Sigma X coincide, so Tr R_N = sum_i 1/(lambda_i - z) - (N - M)/z.
Complex trace_residual_bottom(const VectorXd& eigenvalues_S, int N, Complex z, Complex m);

/// M^{-1} Tr(z R_M Sigma + Sigma (I + m Sigma)^{-1}), from the bundle.
Complex trace_residual_top(const ResolventBundle& bundle, Complex m,
                           const PopulationCovariance& sigma);

/// Same residual from the eigensystem: Tr(R_M Sigma) = sum_i a_i / (lambda_i - z)
/// with a_i = u_i* Sigma u_i.
Complex trace_residual_top(const VectorXd& eigenvalues_S, const VectorXd& oracle_weights,
                           const PopulationCovariance& sigma, Complex z, Complex m);

/// M^{-1} Tr(-Sigma (I + m Sigma)^{-1}).
Complex pi_top_left_mean_trace(const PopulationCovariance& sigma, Complex m);

struct VectorPair {
  VectorXcd v;
  VectorXcd w;
};

/// Fixed test vectors in C^{M+N}, generated from `seed` independently of any
/// sampled data: coordinate vectors at both ends of each block, the uniform
/// vector, block-uniform vectors, and `random_count` pseudo-random unit
/// vectors. Returns diagonal pairs (v, v) plus a few off-diagonal pairs.
std::vector<VectorPair> standard_test_vectors(int M, int N, int random_count = 4,
                                              std::uint64_t seed = 0);

/// |<v, (G - Pi) w>| per pair. Throws DomainError for non-unit vectors.
std::vector<double> entrywise_residuals(const ResolventBundle& bundle,
                                        const DeterministicApprox& approx,
                                        const std::vector<VectorPair>& pairs);

/// Same with Pi replaced by an arbitrary matrix of matching size.
std::vector<double> entrywise_residuals(const ResolventBundle& bundle, const MatrixXcd& reference,
                                        const std::vector<VectorPair>& pairs);

/// Max over pairs.
double entrywise_residual(const ResolventBundle& bundle, const DeterministicApprox& approx,
                          const std::vector<VectorPair>& pairs);

struct IdentityReport {
  double max_violation = 0.0;
  int checks = 0;
  int skipped = 0;  // singular minors
};

/// Minor S^{(i)}: inverse of A with row and column `label` removed, indexed
/// by the remaining labels. Returns false if the minor is numerically singular.
bool resolvent_minor(const IndexedMatrix& A, IndexedMatrix::Label label, IndexedMatrix& out);

/// Evaluates, for `trials` random labels i (and all admissible j, k):
///   (1) S^{(i)}_{jk} = S_jk - S_ji S_ik / S_ii
///   (2) S_ij = -S_ii (A S^{(i)})_ij,  i != j
///   (3) 1 / S_ii = A_ii - (A S^{(i)} A)_ii
/// with S = A^{-1} and label-aware products. Returns the largest absolute defect.
IdentityReport resolvent_identity_check(const IndexedMatrix& A, int trials,
                                        std::uint64_t seed = 0);

/// The specialization of the identities to G (diagonal Sigma): for random
/// r, mu != nu in I_N, i != j in I_M,
///   G^{(r)}_st = G_st - G_sr G_rt / G_rr
///   G_mu,nu = -G_mu,mu (X* G^{(mu)})_mu,nu = -G_nu,nu (G^{(nu)} X)_mu,nu
///   G_ij    = -G_ii (X G^{(i)})_ij        = -G_jj (G^{(j)} X*)_ij
///   G_i,mu  = -G_mu,mu (G^{(mu)} X)_i,mu,   G_mu,i = -G_mu,mu (X* G^{(mu)})_mu,i
///   1 / G_mu,mu = -z - (X* G^{(mu)} X)_mu,mu
IdentityReport green_identity_check(const ResolventBundle& bundle, int trials,
                                    std::uint64_t seed = 0);

}  // namespace lpshrink
