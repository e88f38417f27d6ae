#include "lpshrink/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "lpshrink/sampling.hpp"

namespace lpshrink {

namespace {

constexpr double kSingularRcond = 1e-14;

double max_abs(const MatrixXcd& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

MatrixXcd invert_checked(const MatrixXcd& A, const char* what) {
  Eigen::PartialPivLU<MatrixXcd> lu(A);
  const double rcond = lu.rcond();
  if (!(rcond >= kSingularRcond)) {
    throw NumericError(std::string(what) + ": numerically singular (rcond estimate " +
                       std::to_string(rcond) + ")");
  }
  return lu.inverse();
}

std::vector<IndexedMatrix::Label> labels(IndexedMatrix::Label first, int count) {
  std::vector<IndexedMatrix::Label> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = first + k;
  return out;
}

}  // namespace

IndexedMatrix ResolventBundle::indexed_G() const {
  auto all = index_M;
  all.insert(all.end(), index_N.begin(), index_N.end());
  return IndexedMatrix(all, all, G);
}

ResolventBundle build_bundle(Complex z, const MatrixXcd& X, const PopulationCovariance& sigma) {
  if (!(z.imag() > 0.0)) throw DomainError("build_bundle: need eta > 0");
  const int M = static_cast<int>(X.rows());
  const int N = static_cast<int>(X.cols());
  if (sigma.dimension() != M) {
    throw DomainError("build_bundle: Sigma is " + std::to_string(sigma.dimension()) +
                      "-dimensional, X has " + std::to_string(M) + " rows");
  }
  ResolventBundle b;
  b.z = z;
  b.M = M;
  b.N = N;
  b.X = X;
  b.diagonal_sigma = sigma.is_diagonal();
  b.index_M = labels(0, M);
  b.index_N = labels(M, N);

  const MatrixXcd sigma_c = sigma.matrix().cast<Complex>();
  const MatrixXcd sigma_half = sigma.sqrt().cast<Complex>();
  b.H.resize(M + N, M + N);
  b.H.topLeftCorner(M, M) = -sigma.inverse().cast<Complex>();
  b.H.topRightCorner(M, N) = X;
  b.H.bottomLeftCorner(N, M) = X.adjoint();
  b.H.bottomRightCorner(N, N) = -z * MatrixXcd::Identity(N, N);
  b.G = invert_checked(b.H, "build_bundle: H");

  const MatrixXcd S = sigma_half * X * X.adjoint() * sigma_half;
  b.R_M = invert_checked(S - z * MatrixXcd::Identity(M, M), "build_bundle: S - z");
  b.R_N = invert_checked(X.adjoint() * sigma_c * X - z * MatrixXcd::Identity(N, N),
                         "build_bundle: X* Sigma X - z");

  b.inverse_defect = max_abs(b.G * b.H - MatrixXcd::Identity(M + N, M + N));
  b.top_left_defect = max_abs(b.G.topLeftCorner(M, M) - z * sigma_half * b.R_M * sigma_half);
  b.bottom_right_defect = max_abs(b.G.bottomRightCorner(N, N) - b.R_N);
  return b;
}

ResolventBundle build_bundle(Complex z, const MatrixXd& X, const PopulationCovariance& sigma) {
  return build_bundle(z, MatrixXcd(X.cast<Complex>()), sigma);
}

DeterministicApprox build_pi(Complex z, Complex m, const PopulationCovariance& sigma, int N) {
  if (N < 0) throw DomainError("build_pi: need N >= 0");
  const int M = sigma.dimension();
  VectorXcd top(M);
  for (int i = 0; i < M; ++i) {
    const double tau = sigma.eigenvalues()[i];
    const Complex d = 1.0 + m * tau;
    if (std::abs(d) < 1e-12) {
      throw NumericError("build_pi: 1 + m tau vanishes at tau = " + std::to_string(tau));
    }
    top[i] = -tau / d;
  }
  DeterministicApprox out{z, m, M, N, MatrixXcd::Zero(M + N, M + N)};
  if (sigma.is_diagonal()) {
    out.Pi.topLeftCorner(M, M).diagonal() = top;
  } else {
    const MatrixXcd V = sigma.frame().cast<Complex>();
    out.Pi.topLeftCorner(M, M) = V * top.asDiagonal() * V.adjoint();
  }
  out.Pi.bottomRightCorner(N, N).diagonal().setConstant(m);
  return out;
}

Complex theta(Complex z, const MatrixXd& S, const PopulationCovariance& sigma,
              const std::function<double(double)>& g) {
  if (!(z.imag() > 0.0)) throw DomainError("theta: need eta > 0");
  const auto M = S.rows();
  if (S.cols() != M || sigma.dimension() != M) throw DomainError("theta: dimension mismatch");
  VectorXd gt(M);
  for (Eigen::Index j = 0; j < M; ++j) gt[j] = g(sigma.eigenvalues()[j]);
  const MatrixXd V = sigma.frame();
  const MatrixXcd g_sigma = (V * gt.asDiagonal() * V.transpose()).cast<Complex>();
  const MatrixXcd shifted = S.cast<Complex>() - z * MatrixXcd::Identity(M, M);
  return shifted.partialPivLu().solve(g_sigma).trace();
}

Complex theta_double_sum(Complex z, const SampleEigensystem& eigensystem,
                         const PopulationCovariance& sigma,
                         const std::function<double(double)>& g) {
  const auto M = eigensystem.dimension();
  if (sigma.dimension() != M || eigensystem.vectors.cols() != M) {
    throw DomainError("theta_double_sum: dimension mismatch");
  }
  const MatrixXd overlaps = (eigensystem.vectors.transpose() * sigma.frame()).cwiseAbs2();
  Complex total{0.0, 0.0};
  for (int i = 0; i < M; ++i) {
    const Complex r = 1.0 / (eigensystem.eigenvalues[i] - z);
    for (int j = 0; j < M; ++j) total += r * overlaps(i, j) * g(sigma.eigenvalues()[j]);
  }
  return total;
}

Complex trace_residual_bottom(const ResolventBundle& bundle, Complex m) {
  return bundle.bottom_right().trace() / static_cast<double>(bundle.N) - m;
}

Complex trace_residual_bottom(const VectorXd& eigenvalues_S, int N, Complex z, Complex m) {
  if (N < 1) throw DomainError("trace_residual_bottom: need N >= 1");
  const auto M = eigenvalues_S.size();
  Complex tr{0.0, 0.0};
  for (Eigen::Index i = 0; i < M; ++i) tr += 1.0 / (eigenvalues_S[i] - z);
  tr -= static_cast<double>(N - M) / z;
  return tr / static_cast<double>(N) - m;
}

Complex pi_top_left_mean_trace(const PopulationCovariance& sigma, Complex m) {
  Complex s{0.0, 0.0};
  for (Eigen::Index j = 0; j < sigma.eigenvalues().size(); ++j) {
    const double tau = sigma.eigenvalues()[j];
    s += -tau / (1.0 + m * tau);
  }
  return s / static_cast<double>(sigma.dimension());
}

Complex trace_residual_top(const ResolventBundle& bundle, Complex m,
                           const PopulationCovariance& sigma) {
  const MatrixXcd sigma_c = sigma.matrix().cast<Complex>();
  const Complex tr = (bundle.z * bundle.R_M * sigma_c).trace();
  return tr / static_cast<double>(bundle.M) - pi_top_left_mean_trace(sigma, m);
}

Complex trace_residual_top(const VectorXd& eigenvalues_S, const VectorXd& oracle_weights,
                           const PopulationCovariance& sigma, Complex z, Complex m) {
  if (eigenvalues_S.size() != oracle_weights.size() ||
      eigenvalues_S.size() != sigma.dimension()) {
    throw DomainError("trace_residual_top: dimension mismatch");
  }
  Complex tr{0.0, 0.0};
  for (Eigen::Index i = 0; i < eigenvalues_S.size(); ++i) {
    tr += oracle_weights[i] / (eigenvalues_S[i] - z);
  }
  return z * tr / static_cast<double>(sigma.dimension()) - pi_top_left_mean_trace(sigma, m);
}

std::vector<VectorPair> standard_test_vectors(int M, int N, int random_count,
                                              std::uint64_t seed) {
  if (M < 1 || N < 1) throw DomainError("standard_test_vectors: need M, N >= 1");
  const int D = M + N;
  std::vector<VectorXcd> vs;
  auto unit = [&](int k) {
    VectorXcd e = VectorXcd::Zero(D);
    e[k] = 1.0;
    return e;
  };
  vs.push_back(unit(0));
  if (M > 1) vs.push_back(unit(M - 1));
  vs.push_back(unit(M));
  if (N > 1) vs.push_back(unit(D - 1));
  vs.push_back(VectorXcd::Constant(D, 1.0 / std::sqrt(static_cast<double>(D))));
  {
    VectorXcd pop = VectorXcd::Zero(D);
    pop.head(M).setConstant(1.0 / std::sqrt(static_cast<double>(M)));
    vs.push_back(pop);
    VectorXcd smp = VectorXcd::Zero(D);
    smp.tail(N).setConstant(1.0 / std::sqrt(static_cast<double>(N)));
    vs.push_back(smp);
  }
  std::mt19937_64 gen(derive_seed(seed, static_cast<std::uint64_t>(M),
                                  static_cast<std::uint64_t>(N)));
  std::normal_distribution<double> normal;
  for (int r = 0; r < random_count; ++r) {
    VectorXcd v(D);
    for (int k = 0; k < D; ++k) v[k] = normal(gen);
    vs.push_back(v / v.norm());
  }
  std::vector<VectorPair> pairs;
  for (const auto& v : vs) pairs.push_back({v, v});
  pairs.push_back({vs[0], vs[1]});
  pairs.push_back({vs[0], vs[2]});
  const std::size_t first_random = vs.size() - static_cast<std::size_t>(random_count);
  for (std::size_t r = first_random; r + 1 < vs.size(); ++r) pairs.push_back({vs[r], vs[r + 1]});
  return pairs;
}

std::vector<double> entrywise_residuals(const ResolventBundle& bundle, const MatrixXcd& reference,
                                        const std::vector<VectorPair>& pairs) {
  if (reference.rows() != bundle.G.rows() || reference.cols() != bundle.G.cols()) {
    throw DomainError("entrywise_residuals: reference has the wrong shape");
  }
  const MatrixXcd diff = bundle.G - reference;
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.v.size() != diff.rows() || p.w.size() != diff.rows()) {
      throw DomainError("entrywise_residuals: vector dimension mismatch");
    }
    if (std::abs(p.v.norm() - 1.0) > 1e-10 || std::abs(p.w.norm() - 1.0) > 1e-10) {
      throw DomainError("entrywise_residuals: test vectors must have unit norm");
    }
    out.push_back(std::abs(p.v.dot(diff * p.w)));
  }
  return out;
}

std::vector<double> entrywise_residuals(const ResolventBundle& bundle,
                                        const DeterministicApprox& approx,
                                        const std::vector<VectorPair>& pairs) {
  return entrywise_residuals(bundle, approx.Pi, pairs);
}

double entrywise_residual(const ResolventBundle& bundle, const DeterministicApprox& approx,
                          const std::vector<VectorPair>& pairs) {
  const auto r = entrywise_residuals(bundle, approx, pairs);
  return r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
}

bool resolvent_minor(const IndexedMatrix& A, IndexedMatrix::Label label, IndexedMatrix& out) {
  std::vector<IndexedMatrix::Label> keep;
  for (auto l : A.rows()) {
    if (l != label) keep.push_back(l);
  }
  if (keep.size() + 1 != A.rows().size()) {
    throw DomainError("resolvent_minor: label " + std::to_string(label) + " not in index set");
  }
  if (keep.empty()) {
    out = IndexedMatrix({}, {});
    return true;
  }
  const IndexedMatrix sub = A.restrict(keep, keep);
  Eigen::PartialPivLU<MatrixXcd> lu(sub.values());
  if (!(lu.rcond() >= 1e-13)) return false;
  out = IndexedMatrix(keep, keep, lu.inverse());
  return true;
}

IdentityReport resolvent_identity_check(const IndexedMatrix& A, int trials, std::uint64_t seed) {
  if (A.rows() != A.cols()) {
    throw DomainError("resolvent_identity_check: A must be indexed J x J");
  }
  if (trials < 1) throw DomainError("resolvent_identity_check: need trials >= 1");
  const auto n = A.rows().size();
  const IndexedMatrix S(A.rows(), A.cols(), invert_checked(A.values(), "resolvent_identity_check: A"));
  std::mt19937_64 gen(mix_seed(seed));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  IdentityReport report;
  auto record = [&](Complex lhs, Complex rhs) {
    report.max_violation = std::max(report.max_violation, std::abs(lhs - rhs));
    ++report.checks;
  };
  for (int t = 0; t < trials; ++t) {
    const auto i = A.rows()[pick(gen)];
    IndexedMatrix minor({}, {});
    if (!resolvent_minor(A, i, minor)) {
      ++report.skipped;
      continue;
    }
    const Complex Sii = S.at(i, i);
    // (1) every entry of the minor
    for (auto j : minor.rows()) {
      for (auto k : minor.cols()) {
        record(minor.at(j, k), S.at(j, k) - S.at(j, i) * S.at(i, k) / Sii);
      }
    }
    // (2) S_ij = -S_ii (A S^{(i)})_ij
    const IndexedMatrix AS = indexed_matmul(A, minor);
    for (auto j : minor.cols()) record(S.at(i, j), -Sii * AS.at(i, j));
    // (3) 1/S_ii = A_ii - (A S^{(i)} A)_ii
    const IndexedMatrix ASA = indexed_matmul(AS, A);
    record(1.0 / Sii, A.at(i, i) - ASA.at(i, i));
  }
  return report;
}

IdentityReport green_identity_check(const ResolventBundle& bundle, int trials, std::uint64_t seed) {
  if (!bundle.diagonal_sigma) {
    throw DomainError("green_identity_check: identities require a diagonal Sigma");
  }
  if (trials < 1) throw DomainError("green_identity_check: need trials >= 1");
  const IndexedMatrix H = [&] {
    auto all = bundle.index_M;
    all.insert(all.end(), bundle.index_N.begin(), bundle.index_N.end());
    return IndexedMatrix(all, all, bundle.H);
  }();
  const IndexedMatrix G = bundle.indexed_G();
  const IndexedMatrix X(bundle.index_M, bundle.index_N, bundle.X);
  const IndexedMatrix Xs = X.adjoint();
  const int M = bundle.M;
  const int N = bundle.N;

  std::mt19937_64 gen(mix_seed(seed));
  auto pick_M = [&] {
    return bundle.index_M[std::uniform_int_distribution<int>(0, M - 1)(gen)];
  };
  auto pick_N = [&] {
    return bundle.index_N[std::uniform_int_distribution<int>(0, N - 1)(gen)];
  };

  IdentityReport report;
  auto record = [&](Complex lhs, Complex rhs) {
    report.max_violation = std::max(report.max_violation, std::abs(lhs - rhs));
    ++report.checks;
  };
  auto minor_of = [&](IndexedMatrix::Label r, IndexedMatrix& out) {
    if (resolvent_minor(H, r, out)) return true;
    ++report.skipped;
    return false;
  };

  for (int t = 0; t < trials; ++t) {
    // (1) on a label drawn from the whole index set.
    {
      const auto r = std::uniform_int_distribution<int>(0, 1)(gen) == 0 ? pick_M() : pick_N();
      IndexedMatrix Gr({}, {});
      if (minor_of(r, Gr)) {
        const Complex Grr = G.at(r, r);
        for (auto s : Gr.rows()) {
          for (auto u : Gr.cols()) record(Gr.at(s, u), G.at(s, u) - G.at(s, r) * G.at(r, u) / Grr);
        }
      }
    }
    const auto mu = pick_N();
    IndexedMatrix Gmu({}, {});
    const bool have_mu = minor_of(mu, Gmu);
    if (have_mu) {
      const Complex Gmumu = G.at(mu, mu);
      const IndexedMatrix XsG = indexed_matmul(Xs, Gmu);  // I_N x (I \ mu)
      const IndexedMatrix GX = indexed_matmul(Gmu, X);    // (I \ mu) x I_N
      // (2) mixed: G_i,mu and G_mu,i
      const auto i = pick_M();
      record(G.at(i, mu), -Gmumu * GX.at(i, mu));
      record(G.at(mu, i), -Gmumu * XsG.at(mu, i));
      // (2) mu != nu, first form
      if (N > 1) {
        auto nu = pick_N();
        while (nu == mu) nu = pick_N();
        record(G.at(mu, nu), -Gmumu * XsG.at(mu, nu));
        IndexedMatrix Gnu({}, {});
        if (minor_of(nu, Gnu)) {
          const IndexedMatrix GnuX = indexed_matmul(Gnu, X);
          record(G.at(mu, nu), -G.at(nu, nu) * GnuX.at(mu, nu));
        }
      }
      // (3) 1/G_mu,mu = -z - (X* G^{(mu)} X)_mu,mu
      const IndexedMatrix XsGX = indexed_matmul(XsG, X);
      record(1.0 / Gmumu, -bundle.z - XsGX.at(mu, mu));
    }
    if (M > 1) {
      const auto i = pick_M();
      auto j = pick_M();
      while (j == i) j = pick_M();
      IndexedMatrix Gi({}, {});
      if (minor_of(i, Gi)) {
        const IndexedMatrix XGi = indexed_matmul(X, Gi);
        record(G.at(i, j), -G.at(i, i) * XGi.at(i, j));
      }
      IndexedMatrix Gj({}, {});
      if (minor_of(j, Gj)) {
        const IndexedMatrix GjXs = indexed_matmul(Gj, Xs);
        record(G.at(i, j), -G.at(j, j) * GjXs.at(i, j));
      }
    }
  }
  return report;
}

}  // namespace lpshrink
