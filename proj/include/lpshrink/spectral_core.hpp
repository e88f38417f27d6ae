#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lpshrink/error.hpp"

namespace lpshrink {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Field { Real, Complex };

/// z = E + i*eta. Upper-half-plane routines require eta > 0.
struct SpectralPoint {
  double E = 0.0;
  double eta = 0.0;

  Complex z() const noexcept { return {E, eta}; }
  static SpectralPoint from(Complex z) noexcept { return {z.real(), z.imag()}; }
};

/// Probability measure on the population eigenvalues: atoms (tau, weight),
/// tau > 0, weights summing to one, sorted by descending tau.
class PopulationSpectralMeasure {
 public:
  struct Atom {
    double tau;
    double weight;
  };

  /// Validates and sorts. Weights must sum to 1 within 1e-12.
  explicit PopulationSpectralMeasure(std::vector<Atom> atoms);

  /// The point mass at 1 (Sigma = I).
  static PopulationSpectralMeasure identity();

  /// Uniform measure on the given eigenvalues, equal values merged.
  static PopulationSpectralMeasure from_eigenvalues(std::span<const double> taus);

  std::span<const Atom> atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double mean() const noexcept;
  double max_tau() const noexcept { return atoms_.front().tau; }
  double min_tau() const noexcept { return atoms_.back().tau; }

 private:
  std::vector<Atom> atoms_;
};

/// Reads the `tau,weight` CSV format. Weights are renormalized when their sum
/// is within 1e-6 of one; anything else is an error.
PopulationSpectralMeasure load_psm_csv(const std::filesystem::path& path);
void write_psm_csv(const PopulationSpectralMeasure& psm,
                   const std::filesystem::path& path);

struct ModelConfig {
  int M = 1;
  int N = 1;
  Field field = Field::Real;

  double phi() const noexcept { return static_cast<double>(M) / N; }

  /// M = round(phi * N), at least 1.
  static ModelConfig from_phi(double phi, int N, Field field = Field::Real);
  void validate() const;
};

/// Sigma = V diag(tau) V*, tau descending and strictly positive.
class PopulationCovariance {
 public:
  static PopulationCovariance diagonal(VectorXd taus);
  static PopulationCovariance with_frame(VectorXd taus, MatrixXd frame);

  /// M eigenvalues drawn from the atoms of `psm` by largest-remainder
  /// apportionment of M * weight.
  static PopulationCovariance from_psm(const PopulationSpectralMeasure& psm,
                                       int M);

  int dimension() const noexcept { return static_cast<int>(taus_.size()); }
  const VectorXd& eigenvalues() const noexcept { return taus_; }
  const MatrixXd& frame() const noexcept { return frame_; }
  bool is_diagonal() const noexcept { return diagonal_; }

  MatrixXd matrix() const;
  MatrixXd sqrt() const;
  MatrixXd inverse() const;
  double trace() const noexcept { return taus_.sum(); }
  double inverse_trace() const noexcept { return taus_.cwiseInverse().sum(); }

  /// The empirical population spectral measure (1/M) sum delta_tau.
  PopulationSpectralMeasure psm() const;

 private:
  PopulationCovariance(VectorXd taus, MatrixXd frame, bool diagonal);

  VectorXd taus_;
  MatrixXd frame_;
  bool diagonal_;
};

/// Eigenvalues in descending order with matching orthonormal columns.
template <class Scalar>
struct BasicEigensystem {
  VectorXd eigenvalues;
  Matrix<Scalar> vectors;
  Matrix<Scalar> source;

  int dimension() const noexcept { return static_cast<int>(eigenvalues.size()); }
};

using SampleEigensystem = BasicEigensystem<double>;
using ComplexSampleEigensystem = BasicEigensystem<Complex>;

/// Hermitian eigendecomposition, reordered to descending eigenvalues with
/// ties kept in solver order. Throws NumericError if the solver fails.
template <class Scalar>
BasicEigensystem<Scalar> hermitian_eigensystem(const Matrix<Scalar>& A,
                                               bool compute_vectors = true);

/// Eigenvalues only, descending.
template <class Scalar>
VectorXd hermitian_eigenvalues(const Matrix<Scalar>& A);

/// g(A) = U g(D) U* for symmetric/Hermitian A. Non-square or non-Hermitian
/// input throws DomainError.
template <class Scalar>
Matrix<Scalar> matrix_function(const Matrix<Scalar>& A,
                               const std::function<double(double)>& g);

/// Dense complex matrix whose rows and columns carry integer labels.
/// Products sum only over labels shared by the inner index sets.
class IndexedMatrix {
 public:
  using Label = std::int64_t;

  IndexedMatrix(std::vector<Label> rows, std::vector<Label> cols);
  IndexedMatrix(std::vector<Label> rows, std::vector<Label> cols,
                MatrixXcd values);

  /// Labels 0..n-1 on both sides.
  static IndexedMatrix square(const MatrixXcd& values);

  const std::vector<Label>& rows() const noexcept { return rows_; }
  const std::vector<Label>& cols() const noexcept { return cols_; }
  const MatrixXcd& values() const noexcept { return values_; }
  MatrixXcd& values() noexcept { return values_; }

  /// Entry by label; throws DomainError for unknown labels.
  Complex at(Label row, Label col) const;
  std::ptrdiff_t row_position(Label row) const noexcept;
  std::ptrdiff_t col_position(Label col) const noexcept;

  /// Sub-matrix on the given label subsets (order preserved).
  IndexedMatrix restrict(const std::vector<Label>& rows,
                         const std::vector<Label>& cols) const;

  /// Conjugate transpose, labels swapped.
  IndexedMatrix adjoint() const;

 private:
  std::vector<Label> rows_;
  std::vector<Label> cols_;
  MatrixXcd values_;
};

IndexedMatrix indexed_matmul(const IndexedMatrix& A, const IndexedMatrix& B);

/// Weighted Dirac comb sum w_i delta_{x_i}.
struct AtomicMeasure {
  std::vector<double> locations;
  std::vector<double> weights;

  double total_mass() const noexcept;
  std::size_t size() const noexcept { return locations.size(); }
};

/// sum_i w_i / (x_i - z). Throws DomainError when z sits on an atom with
/// zero imaginary part.
Complex stieltjes_transform(const AtomicMeasure& measure, Complex z);

}  // namespace lpshrink
