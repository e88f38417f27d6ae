#pragma once

#include <cstdint>

#include "lpshrink/spectral_core.hpp"

namespace lpshrink {

/// SplitMix64 finalizer; the basis of every derived seed in the project.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

/// Deterministic seed for a sub-stream, a pure function of its inputs.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// M x N matrix with i.i.d. entries of variance 1/N. Column j is drawn from
/// its own stream seeded by derive_seed(seed, j), so columns can be produced
/// in any order with identical output.
template <class Scalar>
struct BasicDataMatrix {
  Matrix<Scalar> entries;
  std::uint64_t seed = 0;
};

using DataMatrix = BasicDataMatrix<double>;
using ComplexDataMatrix = BasicDataMatrix<Complex>;

/// Real field: N(0, 1/N). Complex field: real and imaginary parts each
/// N(0, 1/(2N)).
template <class Scalar>
BasicDataMatrix<Scalar> sample_data(const ModelConfig& config, std::uint64_t seed);

/// S = Sigma^{1/2} X X* Sigma^{1/2} with its descending eigensystem.
template <class Scalar>
struct BasicSampleCovariance {
  Matrix<Scalar> S;
  BasicEigensystem<Scalar> eigensystem;
};

using SampleCovariance = BasicSampleCovariance<double>;

/// Builds S and its eigendecomposition. With compute_vectors = false only the
/// eigenvalues are filled (cheaper; enough for trace laws of R_N).
template <class Scalar>
BasicSampleCovariance<Scalar> sample_cov(const PopulationCovariance& sigma,
                                         const BasicDataMatrix<Scalar>& X,
                                         bool compute_vectors = true);

}  // namespace lpshrink
