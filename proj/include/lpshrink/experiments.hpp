#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lpshrink/spectral_core.hpp"

namespace lpshrink {

/// Quantity recorded per (N, replicate).
enum class Law {
  BottomTrace,  // |N^-1 Tr R_N - m|,                  bound 1/(N eta)
  TopTrace,     // |M^-1 Tr(z R_M Sigma + Sigma(I+m Sigma)^-1)|, bound 1/(N eta)
  Entrywise,    // max over test pairs |<v,(G - Pi) w>|, bound Psi
  Identities,   // Green-function identity defects,    bound 1e-9
  MuInterval,   // sup-interval distance mu_hat vs rho_S,        bound 1/N
  NuInterval,   // sup-interval distance nu_hat vs delta d rho_S, bound 1/N
  ExcessLoss,   // L(Sigma_tilde) - L(Sigma_oracle),   bound 1/N
};

const char* to_string(Law law) noexcept;
/// Accepts both "bottom-trace" and "bottom_trace" spellings.
Law parse_law(std::string_view name);

struct ExperimentConfig {
  Law law = Law::BottomTrace;
  std::string psm_file;  // informational; empty means the identity measure
  PopulationSpectralMeasure psm = PopulationSpectralMeasure::identity();
  double phi = 0.5;
  Complex z{1.0, 1.0};
  std::vector<int> n_list{64, 128, 256, 512, 1024};
  int replicates = 100;
  std::uint64_t master_seed = 0;
  int grid_size = 200;  // interval laws only
  int threads = 0;      // 0: hardware concurrency; never affects results
  std::string output_dir;

  /// N list strictly increasing and positive, replicates >= 1, phi in (0, 1),
  /// eta > 0. Throws DomainError.
  void validate() const;
};

/// Equality over every field that influences recorded values.
bool same_run(const ExperimentConfig& a, const ExperimentConfig& b);

struct ResultRow {
  int n = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  double value = 0.0;
  double bound = 0.0;
  int pair = -1;  // test-vector pair index for per-pair entrywise tables
};

struct ReplicateFailure {
  int n = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct ResultTable {
  Law law = Law::BottomTrace;
  std::vector<ResultRow> rows;  // sorted by (n, replicate, pair)
  std::vector<ReplicateFailure> failures;
};

/// Seed of replicate `rep` at size N.
std::uint64_t replicate_seed(std::uint64_t master, int N, int rep) noexcept;

/// Runs every (N, replicate) in a worker pool. Replicate failures are
/// recorded; more than 10% failed replicates raises NumericError.
ResultTable run_experiment(const ExperimentConfig& config);

/// Entrywise law with one row per (N, replicate, test pair) instead of the
/// per-replicate maximum.
ResultTable entrywise_pair_table(const ExperimentConfig& config);

struct QuantileSummary {
  int n = 0;
  int count = 0;
  double q50 = 0.0;
  double q90 = 0.0;
  double q99 = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  std::vector<QuantileSummary> per_n;
  std::vector<int> excluded;  // N values with non-positive medians
};

/// Linear-interpolation quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> values, double q);

/// Least squares through (log n, log y). Throws DomainError with < 2 points.
RateFit fit_power_law(const std::vector<int>& n, const std::vector<double>& y);

/// Median of `value` per N, then fit_power_law. Non-positive medians are
/// dropped with a warning.
RateFit fit_rate(const ResultTable& table);

struct DominancePoint {
  int n = 0;
  double q99_ratio = 0.0;
  double threshold = 0.0;  // N^epsilon
};

struct DominanceReport {
  bool passed = false;
  double epsilon = 0.0;
  double ratio_slope = 0.0;  // slope of log q99(X/Y) against log N
  std::vector<DominancePoint> per_n;
  int excluded = 0;          // rows with Y = 0
};

/// Passes when, for every N, q99 of value/bound is <= N^epsilon and the
/// fitted slope of log q99 against log N is <= epsilon + 0.05. Rows with a
/// zero bound are excluded. `bound_scale` multiplies each bound first.
DominanceReport dominance_check(const ResultTable& table, double epsilon,
                                double bound_scale = 1.0);

struct LossRow {
  int n = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string estimator;  // sample, scalar, delta, oracle
  double mv_loss = 0.0;
};

struct LossTable {
  std::vector<LossRow> rows;  // sorted by (n, replicate), estimators in fixed order
  std::vector<ReplicateFailure> failures;
  int optimality_violations = 0;  // replicates where oracle > other + 1e-9
};

/// MV losses of the sample, scalar, delta-shrunk and oracle estimators.
LossTable loss_comparison(const ExperimentConfig& config);

/// Everything persist_run writes.
struct RunRecord {
  ExperimentConfig config;
  std::optional<ResultTable> residuals;
  std::optional<LossTable> losses;
  std::optional<RateFit> fit;
  std::optional<DominanceReport> dominance;
};

/// Writes config.json, results.csv, summary.json and manifest.json under
/// `dir` (created if missing). IoError names the path on failure.
std::filesystem::path persist_run(const RunRecord& record, const std::filesystem::path& dir);

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// CSV with the given column names for (n, seed, value[, bound]); an empty
/// bound name omits the last column. Floats use 17 significant digits.
std::string residual_csv(const ResultTable& table, std::string_view value_name = "value",
                         std::string_view bound_name = "bound");
std::string loss_csv(const LossTable& table);

}  // namespace lpshrink
