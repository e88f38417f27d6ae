#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace lpshrink {

/// Invalid input: violated precondition, malformed data, bad configuration.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed (singular matrix, eigensolver, quadrature).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The self-consistent solver did not reach tolerance.
class SolverError : public NumericError {
 public:
  SolverError(const std::string& what, std::complex<double> last_iterate,
              double residual, int iterations)
      : NumericError(what),
        last_iterate_(last_iterate),
        residual_(residual),
        iterations_(iterations) {}

  std::complex<double> last_iterate() const noexcept { return last_iterate_; }
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  std::complex<double> last_iterate_;
  double residual_;
  int iterations_;
};

/// Filesystem or parse failure; the message names the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lpshrink
