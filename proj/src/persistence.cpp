#include <chrono>
#include <ctime>
#include <sstream>
#include <string>

#include <json.hpp>

#include <Eigen/Core>

#include "lpshrink/error.hpp"
#include "lpshrink/experiments.hpp"
#include "lpshrink/io.hpp"

namespace lpshrink {

using nlohmann::json;

namespace {

json config_json(const ExperimentConfig& config) {
  json atoms = json::array();
  for (const auto& a : config.psm.atoms()) atoms.push_back({a.tau, a.weight});
  // nlohmann orders object keys, which makes the dump canonical.
  return json{{"law", to_string(config.law)},
              {"psm_file", config.psm_file},
              {"psm", atoms},
              {"phi", config.phi},
              {"z", {config.z.real(), config.z.imag()}},
              {"n_list", config.n_list},
              {"replicates", config.replicates},
              {"master_seed", config.master_seed},
              {"grid_size", config.grid_size}};
}

json fit_json(const RateFit& fit) {
  json per_n = json::array();
  for (const auto& q : fit.per_n) {
    per_n.push_back({{"n", q.n}, {"count", q.count}, {"q50", q.q50}, {"q90", q.q90}, {"q99", q.q99}});
  }
  return {{"slope", fit.slope},
          {"intercept", fit.intercept},
          {"stderr", fit.stderr_slope},
          {"per_n", per_n},
          {"excluded", fit.excluded}};
}

json dominance_json(const DominanceReport& d) {
  json per_n = json::array();
  for (const auto& p : d.per_n) {
    per_n.push_back({{"n", p.n}, {"q99_ratio", p.q99_ratio}, {"threshold", p.threshold}});
  }
  return {{"passed", d.passed},
          {"epsilon", d.epsilon},
          {"ratio_slope", d.ratio_slope},
          {"per_n", per_n},
          {"excluded", d.excluded}};
}

json failures_json(const std::vector<ReplicateFailure>& failures) {
  json out = json::array();
  for (const auto& f : failures) {
    out.push_back({{"n", f.n}, {"replicate", f.replicate}, {"seed", f.seed}, {"message", f.message}});
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) {
  return config_json(config).dump(2) + "\n";
}

ExperimentConfig config_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ExperimentConfig c;
    c.law = parse_law(j.at("law").get<std::string>());
    c.psm_file = j.value("psm_file", std::string{});
    std::vector<PopulationSpectralMeasure::Atom> atoms;
    for (const auto& a : j.at("psm")) atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    c.psm = PopulationSpectralMeasure(std::move(atoms));
    c.phi = j.at("phi").get<double>();
    c.z = {j.at("z").at(0).get<double>(), j.at("z").at(1).get<double>()};
    c.n_list = j.at("n_list").get<std::vector<int>>();
    c.replicates = j.at("replicates").get<int>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.grid_size = j.value("grid_size", 200);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw DomainError(std::string("config json: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(io::read_text(path));
  } catch (const DomainError& e) {
    throw DomainError(path.string() + ": " + e.what());
  }
}

std::string residual_csv(const ResultTable& table, std::string_view value_name,
                         std::string_view bound_name) {
  std::ostringstream out;
  out << "n,seed," << value_name;
  if (!bound_name.empty()) out << ',' << bound_name;
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.n << ',' << r.seed << ',' << io::format_double(r.value);
    if (!bound_name.empty()) out << ',' << io::format_double(r.bound);
    out << '\n';
  }
  return out.str();
}

std::string loss_csv(const LossTable& table) {
  std::ostringstream out;
  out << "n,seed,estimator,mv_loss\n";
  for (const auto& r : table.rows) {
    out << r.n << ',' << r.seed << ',' << r.estimator << ',' << io::format_double(r.mv_loss) << '\n';
  }
  return out.str();
}

std::filesystem::path persist_run(const RunRecord& record, const std::filesystem::path& dir) {
  io::ensure_directory(dir);
  io::write_text(dir / "config.json", config_to_json(record.config));

  json summary{{"law", to_string(record.config.law)}};
  if (record.residuals) {
    io::write_text(dir / "results.csv", residual_csv(*record.residuals));
    summary["rows"] = record.residuals->rows.size();
    summary["failures"] = failures_json(record.residuals->failures);
  } else if (record.losses) {
    io::write_text(dir / "results.csv", loss_csv(*record.losses));
    summary["law"] = "losses";
    summary["rows"] = record.losses->rows.size();
    summary["failures"] = failures_json(record.losses->failures);
    summary["optimality_violations"] = record.losses->optimality_violations;
  } else {
    throw DomainError("persist_run: record holds no table");
  }
  if (record.fit) summary["rate_fit"] = fit_json(*record.fit);
  if (record.dominance) summary["dominance"] = dominance_json(*record.dominance);
  io::write_text(dir / "summary.json", summary.dump(2) + "\n");

  const json manifest{{"tool", "lpshrink"},
                      {"version", LPSHRINK_VERSION},
                      {"timestamp", utc_timestamp()},
                      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
                      {"threads", record.config.threads}};
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir;
}

}  // namespace lpshrink
