#include "lpshrink/sampling.hpp"

#include <cmath>
#include <random>
#include <string>

namespace lpshrink {

std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) noexcept {
  return mix_seed(mix_seed(mix_seed(master) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

template <class Scalar>
BasicDataMatrix<Scalar> sample_data(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  BasicDataMatrix<Scalar> X;
  X.seed = seed;
  X.entries.resize(config.M, config.N);
  constexpr bool is_complex = !std::is_same_v<Scalar, double>;
  const double sd = is_complex ? std::sqrt(0.5 / config.N) : std::sqrt(1.0 / config.N);
  for (int j = 0; j < config.N; ++j) {
    std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(j)));
    std::normal_distribution<double> normal(0.0, sd);
    for (int i = 0; i < config.M; ++i) {
      if constexpr (is_complex) {
        const double re = normal(gen);
        const double im = normal(gen);
        X.entries(i, j) = Scalar(re, im);
      } else {
        X.entries(i, j) = normal(gen);
      }
    }
  }
  return X;
}

template <class Scalar>
BasicSampleCovariance<Scalar> sample_cov(const PopulationCovariance& sigma,
                                         const BasicDataMatrix<Scalar>& X,
                                         bool compute_vectors) {
  const auto M = X.entries.rows();
  if (sigma.dimension() != M) {
    throw DomainError("sample_cov: Sigma is " + std::to_string(sigma.dimension()) +
                      "x" + std::to_string(sigma.dimension()) + " but X has " +
                      std::to_string(M) + " rows");
  }
  Matrix<Scalar> Y;
  if (sigma.is_diagonal()) {
    Y = sigma.eigenvalues().cwiseSqrt().cast<Scalar>().asDiagonal() * X.entries;
  } else {
    Y = sigma.sqrt().cast<Scalar>() * X.entries;
  }
  BasicSampleCovariance<Scalar> out;
  out.S = Matrix<Scalar>::Zero(M, M);
  out.S.template selfadjointView<Eigen::Lower>().rankUpdate(Y);
  const Matrix<Scalar> upper = out.S.adjoint();
  out.S.template triangularView<Eigen::StrictlyUpper>() = upper;
  if (compute_vectors) {
    out.eigensystem = hermitian_eigensystem<Scalar>(out.S, true);
  } else {
    out.eigensystem.eigenvalues = hermitian_eigenvalues<Scalar>(out.S);
    out.eigensystem.source = out.S;
  }
  return out;
}

template BasicDataMatrix<double> sample_data(const ModelConfig&, std::uint64_t);
template BasicDataMatrix<Complex> sample_data(const ModelConfig&, std::uint64_t);
template BasicSampleCovariance<double> sample_cov(const PopulationCovariance&,
                                                  const BasicDataMatrix<double>&, bool);
template BasicSampleCovariance<Complex> sample_cov(const PopulationCovariance&,
                                                   const BasicDataMatrix<Complex>&, bool);

}  // namespace lpshrink
