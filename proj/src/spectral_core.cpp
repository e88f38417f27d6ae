#include "lpshrink/spectral_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

namespace lpshrink {

// ---------------------------------------------------------------------------
// PopulationSpectralMeasure

PopulationSpectralMeasure::PopulationSpectralMeasure(std::vector<Atom> atoms)
    : atoms_(std::move(atoms)) {
  if (atoms_.empty()) {
    throw DomainError("population spectral measure: no atoms");
  }
  double total = 0.0;
  for (const auto& a : atoms_) {
    if (!(a.tau > 0.0) || !std::isfinite(a.tau)) {
      throw DomainError("population spectral measure: tau must be finite and > 0, got " +
                        std::to_string(a.tau));
    }
    if (!(a.weight > 0.0) || !std::isfinite(a.weight)) {
      throw DomainError("population spectral measure: weight must be > 0, got " +
                        std::to_string(a.weight));
    }
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("population spectral measure: weights sum to " +
                      std::to_string(total) + ", expected 1");
  }
  std::stable_sort(atoms_.begin(), atoms_.end(),
                   [](const Atom& a, const Atom& b) { return a.tau > b.tau; });
}

PopulationSpectralMeasure PopulationSpectralMeasure::identity() {
  return PopulationSpectralMeasure({{1.0, 1.0}});
}

PopulationSpectralMeasure PopulationSpectralMeasure::from_eigenvalues(
    std::span<const double> taus) {
  if (taus.empty()) {
    throw DomainError("population spectral measure: no eigenvalues");
  }
  std::vector<double> sorted(taus.begin(), taus.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<Atom> atoms;
  const double unit = 1.0 / static_cast<double>(sorted.size());
  for (double t : sorted) {
    if (!atoms.empty() && atoms.back().tau == t) {
      atoms.back().weight += unit;
    } else {
      atoms.push_back({t, unit});
    }
  }
  // Exact renormalization: repeated additions of 1/M can drift by an ulp.
  double total = 0.0;
  for (const auto& a : atoms) total += a.weight;
  for (auto& a : atoms) a.weight /= total;
  return PopulationSpectralMeasure(std::move(atoms));
}

double PopulationSpectralMeasure::mean() const noexcept {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.tau * a.weight;
  return s;
}

// ---------------------------------------------------------------------------
// ModelConfig

ModelConfig ModelConfig::from_phi(double phi, int N, Field field) {
  if (!(phi > 0.0) || N < 1) {
    throw DomainError("model config: need phi > 0 and N >= 1");
  }
  const int M = std::max(1, static_cast<int>(std::lround(phi * N)));
  return ModelConfig{M, N, field};
}

void ModelConfig::validate() const {
  if (M < 1 || N < 1) {
    throw DomainError("model config: need M >= 1 and N >= 1, got M=" +
                      std::to_string(M) + " N=" + std::to_string(N));
  }
}

// ---------------------------------------------------------------------------
// PopulationCovariance

PopulationCovariance::PopulationCovariance(VectorXd taus, MatrixXd frame,
                                           bool diagonal)
    : taus_(std::move(taus)), frame_(std::move(frame)), diagonal_(diagonal) {
  if (taus_.size() == 0) throw DomainError("population covariance: empty");
  for (Eigen::Index i = 0; i < taus_.size(); ++i) {
    if (!(taus_[i] > 0.0)) {
      throw DomainError("population covariance: eigenvalues must be > 0");
    }
    if (i > 0 && taus_[i] > taus_[i - 1]) {
      throw DomainError("population covariance: eigenvalues must be descending");
    }
  }
  if (frame_.rows() != taus_.size() || frame_.cols() != taus_.size()) {
    throw DomainError("population covariance: frame dimension mismatch");
  }
}

PopulationCovariance PopulationCovariance::diagonal(VectorXd taus) {
  const auto M = taus.size();
  return PopulationCovariance(std::move(taus), MatrixXd::Identity(M, M), true);
}

PopulationCovariance PopulationCovariance::with_frame(VectorXd taus,
                                                      MatrixXd frame) {
  const MatrixXd defect =
      frame.transpose() * frame - MatrixXd::Identity(frame.cols(), frame.cols());
  if (defect.cwiseAbs().maxCoeff() > 1e-10) {
    throw DomainError("population covariance: frame is not orthonormal");
  }
  return PopulationCovariance(std::move(taus), std::move(frame), false);
}

PopulationCovariance PopulationCovariance::from_psm(
    const PopulationSpectralMeasure& psm, int M) {
  if (M < 1) throw DomainError("population covariance: M must be >= 1");
  const auto atoms = psm.atoms();
  std::vector<int> counts(atoms.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    const double exact = atoms[k].weight * M;
    counts[k] = static_cast<int>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(exact - counts[k], k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < M; ++r, ++assigned) {
    ++counts[remainders[r % remainders.size()].second];
  }
  VectorXd taus(M);
  Eigen::Index pos = 0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    for (int c = 0; c < counts[k]; ++c) taus[pos++] = atoms[k].tau;
  }
  return diagonal(std::move(taus));
}

MatrixXd PopulationCovariance::matrix() const {
  if (diagonal_) return taus_.asDiagonal();
  return frame_ * taus_.asDiagonal() * frame_.transpose();
}

MatrixXd PopulationCovariance::sqrt() const {
  const VectorXd r = taus_.cwiseSqrt();
  if (diagonal_) return r.asDiagonal();
  return frame_ * r.asDiagonal() * frame_.transpose();
}

MatrixXd PopulationCovariance::inverse() const {
  const VectorXd r = taus_.cwiseInverse();
  if (diagonal_) return r.asDiagonal();
  return frame_ * r.asDiagonal() * frame_.transpose();
}

PopulationSpectralMeasure PopulationCovariance::psm() const {
  return PopulationSpectralMeasure::from_eigenvalues(
      std::span<const double>(taus_.data(), static_cast<std::size_t>(taus_.size())));
}

// ---------------------------------------------------------------------------
// Eigensystems and matrix functions

namespace {

template <class Scalar>
void require_hermitian(const Matrix<Scalar>& A, const char* who) {
  if (A.rows() != A.cols()) {
    throw DomainError(std::string(who) + ": matrix is not square (" +
                      std::to_string(A.rows()) + "x" + std::to_string(A.cols()) + ")");
  }
  if (A.size() == 0) return;
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  const double defect = (A - A.adjoint()).cwiseAbs().maxCoeff();
  if (defect > 1e-10 * scale) {
    throw DomainError(std::string(who) + ": matrix is not symmetric/Hermitian");
  }
}

std::vector<Eigen::Index> descending_order(const VectorXd& ascending) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(ascending.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return ascending[a] > ascending[b];
  });
  return order;
}

}  // namespace

template <class Scalar>
BasicEigensystem<Scalar> hermitian_eigensystem(const Matrix<Scalar>& A,
                                               bool compute_vectors) {
  require_hermitian(A, "hermitian_eigensystem");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(
      A, compute_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericError("hermitian_eigensystem: eigensolver did not converge");
  }
  const VectorXd& ascending = solver.eigenvalues();
  const auto order = descending_order(ascending);
  BasicEigensystem<Scalar> out;
  out.eigenvalues.resize(ascending.size());
  if (compute_vectors) out.vectors.resize(A.rows(), A.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    out.eigenvalues[idx] = ascending[order[k]];
    if (compute_vectors) out.vectors.col(idx) = solver.eigenvectors().col(order[k]);
  }
  out.source = A;
  return out;
}

template <class Scalar>
VectorXd hermitian_eigenvalues(const Matrix<Scalar>& A) {
  if (A.rows() != A.cols()) {
    throw DomainError("hermitian_eigenvalues: matrix is not square");
  }
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(A, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericError("hermitian_eigenvalues: eigensolver did not converge");
  }
  return solver.eigenvalues().reverse();
}

template <class Scalar>
Matrix<Scalar> matrix_function(const Matrix<Scalar>& A,
                               const std::function<double(double)>& g) {
  require_hermitian(A, "matrix_function");
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(A);
  if (solver.info() != Eigen::Success) {
    throw NumericError("matrix_function: eigensolver did not converge");
  }
  const VectorXd& d = solver.eigenvalues();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gd(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) gd[i] = Scalar(g(d[i]));
  const auto& U = solver.eigenvectors();
  return U * gd.asDiagonal() * U.adjoint();
}

template BasicEigensystem<double> hermitian_eigensystem(const Matrix<double>&, bool);
template BasicEigensystem<Complex> hermitian_eigensystem(const Matrix<Complex>&, bool);
template VectorXd hermitian_eigenvalues(const Matrix<double>&);
template VectorXd hermitian_eigenvalues(const Matrix<Complex>&);
template Matrix<double> matrix_function(const Matrix<double>&,
                                        const std::function<double(double)>&);
template Matrix<Complex> matrix_function(const Matrix<Complex>&,
                                         const std::function<double(double)>&);

// ---------------------------------------------------------------------------
// IndexedMatrix

IndexedMatrix::IndexedMatrix(std::vector<Label> rows, std::vector<Label> cols)
    : rows_(std::move(rows)),
      cols_(std::move(cols)),
      values_(MatrixXcd::Zero(static_cast<Eigen::Index>(rows_.size()),
                              static_cast<Eigen::Index>(cols_.size()))) {}

IndexedMatrix::IndexedMatrix(std::vector<Label> rows, std::vector<Label> cols,
                             MatrixXcd values)
    : rows_(std::move(rows)), cols_(std::move(cols)), values_(std::move(values)) {
  if (values_.rows() != static_cast<Eigen::Index>(rows_.size()) ||
      values_.cols() != static_cast<Eigen::Index>(cols_.size())) {
    throw DomainError("indexed matrix: entry count does not match index sets");
  }
}

IndexedMatrix IndexedMatrix::square(const MatrixXcd& values) {
  std::vector<Label> r(static_cast<std::size_t>(values.rows()));
  std::vector<Label> c(static_cast<std::size_t>(values.cols()));
  std::iota(r.begin(), r.end(), Label{0});
  std::iota(c.begin(), c.end(), Label{0});
  return IndexedMatrix(std::move(r), std::move(c), values);
}

std::ptrdiff_t IndexedMatrix::row_position(Label row) const noexcept {
  const auto it = std::find(rows_.begin(), rows_.end(), row);
  return it == rows_.end() ? -1 : it - rows_.begin();
}

std::ptrdiff_t IndexedMatrix::col_position(Label col) const noexcept {
  const auto it = std::find(cols_.begin(), cols_.end(), col);
  return it == cols_.end() ? -1 : it - cols_.begin();
}

Complex IndexedMatrix::at(Label row, Label col) const {
  const auto r = row_position(row);
  const auto c = col_position(col);
  if (r < 0 || c < 0) {
    throw DomainError("indexed matrix: label (" + std::to_string(row) + ", " +
                      std::to_string(col) + ") not in index sets");
  }
  return values_(r, c);
}

IndexedMatrix IndexedMatrix::restrict(const std::vector<Label>& rows,
                                      const std::vector<Label>& cols) const {
  IndexedMatrix out(rows, cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = row_position(rows[i]);
    if (r < 0) throw DomainError("indexed matrix: restrict to unknown row label");
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto c = col_position(cols[j]);
      if (c < 0) throw DomainError("indexed matrix: restrict to unknown column label");
      out.values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          values_(r, c);
    }
  }
  return out;
}

IndexedMatrix IndexedMatrix::adjoint() const {
  return IndexedMatrix(cols_, rows_, values_.adjoint());
}

IndexedMatrix indexed_matmul(const IndexedMatrix& A, const IndexedMatrix& B) {
  std::unordered_map<IndexedMatrix::Label, Eigen::Index> b_rows;
  for (std::size_t k = 0; k < B.rows().size(); ++k) {
    b_rows.emplace(B.rows()[k], static_cast<Eigen::Index>(k));
  }
  std::vector<Eigen::Index> a_inner;
  std::vector<Eigen::Index> b_inner;
  for (std::size_t k = 0; k < A.cols().size(); ++k) {
    const auto it = b_rows.find(A.cols()[k]);
    if (it != b_rows.end()) {
      a_inner.push_back(static_cast<Eigen::Index>(k));
      b_inner.push_back(it->second);
    }
  }
  IndexedMatrix out(A.rows(), B.cols());
  if (a_inner.empty()) return out;
  out.values() = A.values()(Eigen::all, a_inner) * B.values()(b_inner, Eigen::all);
  return out;
}

// ---------------------------------------------------------------------------
// Atomic measures

double AtomicMeasure::total_mass() const noexcept {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

Complex stieltjes_transform(const AtomicMeasure& measure, Complex z) {
  if (measure.locations.size() != measure.weights.size()) {
    throw DomainError("stieltjes_transform: locations/weights length mismatch");
  }
  Complex s{0.0, 0.0};
  for (std::size_t i = 0; i < measure.size(); ++i) {
    const Complex d = measure.locations[i] - z;
    if (d == Complex{0.0, 0.0}) {
      throw DomainError("stieltjes_transform: pole at atom " +
                        std::to_string(measure.locations[i]));
    }
    s += measure.weights[i] / d;
  }
  return s;
}

}  // namespace lpshrink
