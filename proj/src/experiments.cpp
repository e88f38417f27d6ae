#include "lpshrink/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <spdlog/spdlog.h>

#include "lpshrink/measures.hpp"
#include "lpshrink/mp_law.hpp"
#include "lpshrink/resolvent.hpp"
#include "lpshrink/sampling.hpp"
#include "lpshrink/shrinkage.hpp"

namespace lpshrink {

const char* to_string(Law law) noexcept {
  switch (law) {
    case Law::BottomTrace: return "bottom-trace";
    case Law::TopTrace: return "top-trace";
    case Law::Entrywise: return "entrywise";
    case Law::Identities: return "identities";
    case Law::MuInterval: return "mu-interval";
    case Law::NuInterval: return "nu-interval";
    case Law::ExcessLoss: return "excess-loss";
  }
  return "unknown";
}

Law parse_law(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '_', '-');
  for (Law law : {Law::BottomTrace, Law::TopTrace, Law::Entrywise, Law::Identities,
                  Law::MuInterval, Law::NuInterval, Law::ExcessLoss}) {
    if (key == to_string(law)) return law;
  }
  if (key == "mu") return Law::MuInterval;
  if (key == "nu") return Law::NuInterval;
  throw DomainError("unknown law '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (!(phi > 0.0 && phi < 1.0)) {
    throw DomainError("experiment: phi must lie in (0, 1), got " + std::to_string(phi));
  }
  if (!(z.imag() > 0.0)) throw DomainError("experiment: need Im z > 0");
  if (n_list.empty()) throw DomainError("experiment: empty N list");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 2) throw DomainError("experiment: N must be >= 2");
    if (i > 0 && n_list[i] <= n_list[i - 1]) {
      throw DomainError("experiment: N list must be strictly increasing");
    }
  }
  if (replicates < 1) throw DomainError("experiment: replicates must be >= 1");
  if (grid_size < 2) throw DomainError("experiment: grid size must be >= 2");
  if (threads < 0) throw DomainError("experiment: threads must be >= 0");
}

bool same_run(const ExperimentConfig& a, const ExperimentConfig& b) {
  if (a.law != b.law || a.phi != b.phi || a.z != b.z || a.n_list != b.n_list ||
      a.replicates != b.replicates || a.master_seed != b.master_seed ||
      a.grid_size != b.grid_size || a.psm.size() != b.psm.size()) {
    return false;
  }
  for (std::size_t k = 0; k < a.psm.size(); ++k) {
    if (a.psm.atoms()[k].tau != b.psm.atoms()[k].tau ||
        a.psm.atoms()[k].weight != b.psm.atoms()[k].weight) {
      return false;
    }
  }
  return true;
}

std::uint64_t replicate_seed(std::uint64_t master, int N, int rep) noexcept {
  return derive_seed(master, static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(rep));
}

namespace {

// Per-N data shared read-only by every replicate.
struct SizeContext {
  int N;
  int M;
  PopulationCovariance sigma;
  Complex m;
  double trace_bound;
  double psi;
  std::vector<VectorPair> pairs;
};

struct SharedContext {
  std::unique_ptr<DeterministicMeasure> esd;
  std::unique_ptr<IntervalDistance> distance;
  std::unique_ptr<DeltaCurve> curve;
  std::vector<SizeContext> sizes;
};

bool is_scalar(const PopulationCovariance& sigma) {
  const auto& t = sigma.eigenvalues();
  return t.maxCoeff() == t.minCoeff();
}

SharedContext prepare(const ExperimentConfig& config, bool need_pairs) {
  SharedContext ctx;
  const Law law = config.law;
  if (law == Law::MuInterval || law == Law::NuInterval) {
    ctx.esd = std::make_unique<DeterministicMeasure>(
        DeterministicMeasure::esd_of_S(config.psm, config.phi));
    const WeightFunction weight = law == Law::NuInterval ? delta_weight(*ctx.esd) : nullptr;
    ctx.distance = std::make_unique<IntervalDistance>(*ctx.esd, weight, config.grid_size);
  }
  if (law == Law::ExcessLoss) {
    ctx.curve = std::make_unique<DeltaCurve>(shrinkage_profile(config.psm, config.phi), config.phi);
  }
  for (int N : config.n_list) {
    const auto model = ModelConfig::from_phi(config.phi, N);
    auto sigma = PopulationCovariance::from_psm(config.psm, model.M);
    const Complex m = solve_m(config.z, sigma.psm(), model.phi()).m;
    SizeContext size{N,
                     model.M,
                     std::move(sigma),
                     m,
                     1.0 / (N * config.z.imag()),
                     psi(config.z, m, N).psi,
                     {}};
    if (need_pairs) size.pairs = standard_test_vectors(model.M, N);
    ctx.sizes.push_back(std::move(size));
  }
  return ctx;
}

// Oracle weights, skipping the eigenvector product when Sigma is scalar.
VectorXd weights_for(const SampleEigensystem& eig, const PopulationCovariance& sigma) {
  if (is_scalar(sigma)) return VectorXd::Constant(eig.dimension(), sigma.eigenvalues()[0]);
  return oracle_weights(eig.vectors, sigma);
}

std::vector<ResultRow> run_replicate(const ExperimentConfig& config, const SharedContext& ctx,
                                     const SizeContext& size, int rep, bool per_pair) {
  const std::uint64_t seed = replicate_seed(config.master_seed, size.N, rep);
  const auto X = sample_data<double>(ModelConfig{size.M, size.N, Field::Real}, seed);
  const Complex z = config.z;
  auto row = [&](double value, double bound, int pair = -1) {
    return ResultRow{size.N, rep, seed, value, bound, pair};
  };

  switch (config.law) {
    case Law::BottomTrace: {
      const auto cov = sample_cov(size.sigma, X, false);
      const double r = std::abs(trace_residual_bottom(cov.eigensystem.eigenvalues, size.N, z, size.m));
      return {row(r, size.trace_bound)};
    }
    case Law::TopTrace: {
      const auto cov = sample_cov(size.sigma, X, !is_scalar(size.sigma));
      const VectorXd a = is_scalar(size.sigma)
                             ? VectorXd::Constant(size.M, size.sigma.eigenvalues()[0])
                             : oracle_weights(cov.eigensystem.vectors, size.sigma);
      const double r =
          std::abs(trace_residual_top(cov.eigensystem.eigenvalues, a, size.sigma, z, size.m));
      return {row(r, size.trace_bound)};
    }
    case Law::Entrywise: {
      const auto bundle = build_bundle(z, X.entries, size.sigma);
      const auto approx = build_pi(z, size.m, size.sigma, size.N);
      const auto residuals = entrywise_residuals(bundle, approx, size.pairs);
      if (!per_pair) {
        return {row(*std::max_element(residuals.begin(), residuals.end()), size.psi)};
      }
      std::vector<ResultRow> rows;
      for (std::size_t k = 0; k < residuals.size(); ++k) {
        rows.push_back(row(residuals[k], size.psi, static_cast<int>(k)));
      }
      return rows;
    }
    case Law::Identities: {
      const auto bundle = build_bundle(z, X.entries, size.sigma);
      const auto report = green_identity_check(bundle, 4, seed);
      return {row(report.max_violation, 1e-9)};
    }
    case Law::MuInterval: {
      const auto cov = sample_cov(size.sigma, X, false);
      AtomicMeasure mu;
      const auto& lam = cov.eigensystem.eigenvalues;
      mu.locations.assign(lam.data(), lam.data() + lam.size());
      mu.weights.assign(mu.locations.size(), 1.0 / size.M);
      return {row((*ctx.distance)(mu), 1.0 / size.N)};
    }
    case Law::NuInterval: {
      const auto cov = sample_cov(size.sigma, X, !is_scalar(size.sigma));
      const auto nu = weighted_spectral_measure(cov.eigensystem.eigenvalues,
                                                weights_for(cov.eigensystem, size.sigma));
      return {row((*ctx.distance)(nu), 1.0 / size.N)};
    }
    case Law::ExcessLoss: {
      const auto cov = sample_cov(size.sigma, X, true);
      const VectorXd a = weights_for(cov.eigensystem, size.sigma);
      const auto shrunk = delta_shrink_spectrum(cov.eigensystem.eigenvalues, *ctx.curve, size.N);
      const double inv_trace = size.sigma.inverse_trace();
      const double gap = mv_loss(shrunk.dhat, a, inv_trace, size.N) - mv_loss(a, a, inv_trace, size.N);
      return {row(gap, 1.0 / size.N)};
    }
  }
  throw DomainError("run_experiment: unhandled law");
}

// Runs task(i) for i in [0, count) on a pool; task must not throw.
template <class Task>
void parallel_for(std::size_t count, int threads, Task&& task) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) task(i);
  };
  if (workers <= 1) {
    drain();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(drain);
}

struct Outcome {
  std::vector<ResultRow> rows;
  std::optional<std::string> error;
};

ResultTable run_table(const ExperimentConfig& config, bool per_pair) {
  config.validate();
  const SharedContext ctx = prepare(config, config.law == Law::Entrywise);
  const std::size_t reps = static_cast<std::size_t>(config.replicates);
  const std::size_t total = ctx.sizes.size() * reps;
  std::vector<Outcome> outcomes(total);

  parallel_for(total, config.threads, [&](std::size_t i) {
    const auto& size = ctx.sizes[i / reps];
    const int rep = static_cast<int>(i % reps);
    try {
      outcomes[i].rows = run_replicate(config, ctx, size, rep, per_pair);
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  });

  // Outcomes are indexed by (N, replicate), so the table order is fixed
  // regardless of scheduling.
  ResultTable table;
  table.law = config.law;
  for (std::size_t i = 0; i < total; ++i) {
    if (outcomes[i].error) {
      const int N = ctx.sizes[i / reps].N;
      const int rep = static_cast<int>(i % reps);
      table.failures.push_back({N, rep, replicate_seed(config.master_seed, N, rep), *outcomes[i].error});
      continue;
    }
    table.rows.insert(table.rows.end(), outcomes[i].rows.begin(), outcomes[i].rows.end());
  }
  if (!table.failures.empty()) {
    spdlog::warn("{}: {} of {} replicates failed; first: {}", to_string(config.law),
                 table.failures.size(), total, table.failures.front().message);
  }
  if (table.failures.size() * 10 > total) {
    throw NumericError(std::string(to_string(config.law)) + ": " +
                       std::to_string(table.failures.size()) + " of " + std::to_string(total) +
                       " replicates failed (limit 10%); first: " + table.failures.front().message);
  }
  return table;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& config) { return run_table(config, false); }

ResultTable entrywise_pair_table(const ExperimentConfig& config) {
  if (config.law != Law::Entrywise) throw DomainError("entrywise_pair_table: law must be entrywise");
  return run_table(config, true);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

RateFit fit_power_law(const std::vector<int>& n, const std::vector<double>& y) {
  if (n.size() != y.size()) throw DomainError("fit: length mismatch");
  if (n.size() < 2) throw DomainError("fit: need at least 2 points, have " + std::to_string(n.size()));
  const auto k = static_cast<double>(n.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(y[i] > 0.0)) throw DomainError("fit: non-positive value");
    mx += std::log(static_cast<double>(n[i]));
    my += std::log(y[i]);
  }
  mx /= k;
  my /= k;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double dx = std::log(static_cast<double>(n[i])) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit: need at least 2 distinct N values");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n.size() > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n.size(); ++i) {
      const double r = std::log(y[i]) - fit.intercept - fit.slope * std::log(static_cast<double>(n[i]));
      ssr += r * r;
    }
    fit.stderr_slope = std::sqrt(ssr / (k - 2.0) / sxx);
  }
  return fit;
}

namespace {

std::vector<std::pair<int, std::vector<double>>> group_by_n(const std::vector<ResultRow>& rows,
                                                            auto&& extract) {
  std::vector<std::pair<int, std::vector<double>>> groups;
  for (const auto& r : rows) {
    if (groups.empty() || groups.back().first != r.n) groups.push_back({r.n, {}});
    if (auto v = extract(r)) groups.back().second.push_back(*v);
  }
  return groups;
}

}  // namespace

RateFit fit_rate(const ResultTable& table) {
  std::vector<QuantileSummary> per_n;
  std::vector<int> ns;
  std::vector<double> medians;
  std::vector<int> excluded;
  auto groups = group_by_n(table.rows, [](const ResultRow& r) { return std::optional(r.value); });
  for (auto& [n, values] : groups) {
    if (values.empty()) continue;
    QuantileSummary q{n, static_cast<int>(values.size()), quantile(values, 0.5),
                      quantile(values, 0.9), quantile(values, 0.99)};
    per_n.push_back(q);
    if (q.q50 > 0.0) {
      ns.push_back(n);
      medians.push_back(q.q50);
    } else {
      spdlog::warn("fit_rate: non-positive median at N = {}; excluded", n);
      excluded.push_back(n);
    }
  }
  RateFit fit = fit_power_law(ns, medians);
  fit.per_n = std::move(per_n);
  fit.excluded = std::move(excluded);
  return fit;
}

DominanceReport dominance_check(const ResultTable& table, double epsilon, double bound_scale) {
  DominanceReport report;
  report.epsilon = epsilon;
  int excluded = 0;
  auto groups = group_by_n(table.rows, [&](const ResultRow& r) -> std::optional<double> {
    const double y = r.bound * bound_scale;
    if (y == 0.0) {
      ++excluded;
      return std::nullopt;
    }
    return r.value / y;
  });
  if (excluded > 0) spdlog::warn("dominance_check: {} row(s) with zero bound excluded", excluded);
  report.excluded = excluded;

  bool passed = true;
  std::vector<int> ns;
  std::vector<double> q99s;
  for (auto& [n, ratios] : groups) {
    if (ratios.empty()) continue;
    DominancePoint p{n, quantile(ratios, 0.99), std::pow(static_cast<double>(n), epsilon)};
    passed = passed && p.q99_ratio <= p.threshold;
    report.per_n.push_back(p);
    ns.push_back(n);
    q99s.push_back(p.q99_ratio);
  }
  if (report.per_n.empty()) throw DomainError("dominance_check: no usable rows");
  const bool positive = std::all_of(q99s.begin(), q99s.end(), [](double v) { return v > 0.0; });
  if (ns.size() >= 2 && positive) {
    report.ratio_slope = fit_power_law(ns, q99s).slope;
    passed = passed && report.ratio_slope <= epsilon + 0.05;
  }
  report.passed = passed;
  return report;
}

LossTable loss_comparison(const ExperimentConfig& config) {
  config.validate();
  const DeltaCurve curve(shrinkage_profile(config.psm, config.phi), config.phi);
  std::vector<SizeContext> sizes;
  for (int N : config.n_list) {
    const auto model = ModelConfig::from_phi(config.phi, N);
    sizes.push_back({N, model.M, PopulationCovariance::from_psm(config.psm, model.M), {}, 0.0, 0.0, {}});
  }
  const std::size_t reps = static_cast<std::size_t>(config.replicates);
  const std::size_t total = sizes.size() * reps;

  struct LossOutcome {
    std::vector<LossRow> rows;
    bool violation = false;
    std::optional<std::string> error;
  };
  std::vector<LossOutcome> outcomes(total);

  parallel_for(total, config.threads, [&](std::size_t i) {
    const auto& size = sizes[i / reps];
    const int rep = static_cast<int>(i % reps);
    const std::uint64_t seed = replicate_seed(config.master_seed, size.N, rep);
    try {
      const auto X = sample_data<double>(ModelConfig{size.M, size.N, Field::Real}, seed);
      const auto cov = sample_cov(size.sigma, X, true);
      const auto& eig = cov.eigensystem;
      const VectorXd a = weights_for(eig, size.sigma);
      const double inv_trace = size.sigma.inverse_trace();
      auto loss = [&](const VectorXd& d) { return mv_loss(d, a, inv_trace, size.N); };

      const auto baselines = baseline_estimates(eig);
      const double sample = loss(baselines[0].dhat);
      const double scalar = loss(baselines[1].dhat);
      const double shrunk = loss(delta_shrink_spectrum(eig.eigenvalues, curve, size.N).dhat);
      const double oracle = loss(a);
      auto& out = outcomes[i];
      out.rows = {{size.N, rep, seed, "sample", sample},
                  {size.N, rep, seed, "scalar", scalar},
                  {size.N, rep, seed, "delta", shrunk},
                  {size.N, rep, seed, "oracle", oracle}};
      out.violation = oracle > std::min({sample, scalar, shrunk}) + 1e-9;
    } catch (const std::exception& e) {
      outcomes[i].error = e.what();
    }
  });

  LossTable table;
  for (std::size_t i = 0; i < total; ++i) {
    const int N = sizes[i / reps].N;
    const int rep = static_cast<int>(i % reps);
    if (outcomes[i].error) {
      table.failures.push_back({N, rep, replicate_seed(config.master_seed, N, rep), *outcomes[i].error});
      continue;
    }
    table.rows.insert(table.rows.end(), outcomes[i].rows.begin(), outcomes[i].rows.end());
    if (outcomes[i].violation) ++table.optimality_violations;
  }
  if (table.failures.size() * 10 > total) {
    throw NumericError("losses: " + std::to_string(table.failures.size()) + " of " +
                       std::to_string(total) + " replicates failed (limit 10%); first: " +
                       table.failures.front().message);
  }
  if (table.optimality_violations > 0) {
    spdlog::warn("losses: oracle beaten in {} replicate(s)", table.optimality_violations);
  }
  return table;
}

}  // namespace lpshrink
