#include "lpshrink/lpshrink.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lpshrink/error.hpp"
#include "lpshrink/experiments.hpp"
#include "lpshrink/io.hpp"
#include "lpshrink/mp_law.hpp"
#include "lpshrink/sampling.hpp"
#include "lpshrink/shrinkage.hpp"

struct lps_psm {
  lpshrink::PopulationSpectralMeasure value;
};

struct lps_profile {
  lpshrink::BoundaryProfile value;
};

namespace {

using namespace lpshrink;
namespace fs = std::filesystem;
using nlohmann::json;

thread_local std::string g_last_error;

// Library log output goes to stderr so stdout stays reserved for data.
void ensure_logger() {
  static const bool once = [] {
    auto logger = spdlog::stderr_color_mt("lpshrink");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)once;
}

template <class F>
lps_status guarded(F&& f) {
  ensure_logger();
  try {
    f();
    return LPS_OK;
  } catch (const DomainError& e) {
    g_last_error = e.what();
    return LPS_ERR_DOMAIN;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return LPS_ERR_IO;
  } catch (const NumericError& e) {
    g_last_error = e.what();
    return LPS_ERR_NUMERIC;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return LPS_ERR_DOMAIN;
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
    return LPS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "internal error: unknown exception";
    return LPS_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

ExperimentConfig to_config(const lps_experiment* c, bool need_law) {
  require(c != nullptr, "experiment config is NULL");
  require(c->psm != nullptr, "experiment psm is NULL");
  require(c->n_list != nullptr && c->n_count > 0, "experiment N list is empty");
  ExperimentConfig config;
  if (need_law) {
    require(c->law != nullptr, "experiment law is NULL");
    config.law = parse_law(c->law);
  } else {
    config.law = Law::ExcessLoss;
  }
  config.psm = c->psm->value;
  config.psm_file = c->psm_file ? c->psm_file : "";
  config.phi = c->phi;
  config.z = {c->z_re, c->z_im};
  config.n_list.assign(c->n_list, c->n_list + c->n_count);
  config.replicates = c->replicates;
  config.master_seed = c->seed;
  config.grid_size = c->grid_size > 0 ? c->grid_size : 200;
  config.threads = c->threads;
  config.validate();
  return config;
}

json failure_list(const std::vector<ReplicateFailure>& failures) {
  json out = json::array();
  for (const auto& f : failures) {
    out.push_back({{"n", f.n}, {"replicate", f.replicate}, {"seed", f.seed}, {"message", f.message}});
  }
  return out;
}

void fill_summary(lps_run_summary* out, const ResultTable& table) {
  if (!out) return;
  *out = lps_run_summary{};
  out->rows = table.rows.size();
  out->failures = table.failures.size();
  out->dominance_passed = -1;
}

// results.csv with custom column names plus config.json and a failure list.
void write_plain_run(const ExperimentConfig& config, const ResultTable& table, const char* out_dir,
                     std::string_view value_name, std::string_view bound_name) {
  require(out_dir != nullptr, "output directory is NULL");
  const fs::path dir(out_dir);
  io::ensure_directory(dir);
  io::write_text(dir / "config.json", config_to_json(config));
  io::write_text(dir / "results.csv", residual_csv(table, value_name, bound_name));
  const json summary{{"law", to_string(config.law)},
                     {"rows", table.rows.size()},
                     {"failures", failure_list(table.failures)}};
  io::write_text(dir / "summary.json", summary.dump(2) + "\n");
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ofstream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  write_u64(out, bits);
}

}  // namespace

extern "C" {

const char* lps_version(void) { return LPSHRINK_VERSION; }

const char* lps_last_error(void) { return g_last_error.c_str(); }

void lps_set_log_level(int level) {
  ensure_logger();
  spdlog::set_level(static_cast<spdlog::level::level_enum>(std::clamp(level, 0, 6)));
}

lps_status lps_psm_load(const char* path, lps_psm** out) {
  return guarded([&] {
    require(path && out, "lps_psm_load: NULL argument");
    *out = new lps_psm{load_psm_csv(path)};
  });
}

lps_status lps_psm_from_atoms(const double* tau, const double* weight, size_t count,
                              lps_psm** out) {
  return guarded([&] {
    require(tau && weight && out && count > 0, "lps_psm_from_atoms: NULL or empty argument");
    std::vector<PopulationSpectralMeasure::Atom> atoms;
    for (size_t k = 0; k < count; ++k) atoms.push_back({tau[k], weight[k]});
    *out = new lps_psm{PopulationSpectralMeasure(std::move(atoms))};
  });
}

lps_status lps_psm_identity(lps_psm** out) {
  return guarded([&] {
    require(out != nullptr, "lps_psm_identity: NULL argument");
    *out = new lps_psm{PopulationSpectralMeasure::identity()};
  });
}

size_t lps_psm_size(const lps_psm* psm) { return psm ? psm->value.size() : 0; }

lps_status lps_psm_atom(const lps_psm* psm, size_t index, double* tau, double* weight) {
  return guarded([&] {
    require(psm && tau && weight, "lps_psm_atom: NULL argument");
    require(index < psm->value.size(), "lps_psm_atom: index out of range");
    *tau = psm->value.atoms()[index].tau;
    *weight = psm->value.atoms()[index].weight;
  });
}

void lps_psm_free(lps_psm* psm) { delete psm; }

lps_status lps_solve_m(const lps_psm* psm, double phi, double z_re, double z_im, double tol,
                       lps_solution* out) {
  return guarded([&] {
    require(psm && out, "lps_solve_m: NULL argument");
    require(phi > 0.0, "lps_solve_m: need phi > 0");
    SolverOptions options;
    if (tol > 0.0) options.tol = tol;
    const auto s = solve_m({z_re, z_im}, psm->value, phi, options);
    *out = {s.m.real(), s.m.imag(), s.residual, s.iterations};
  });
}

lps_status lps_profile_compute(const lps_psm* psm, double phi, double emin, double emax,
                               int points, lps_profile** out) {
  return guarded([&] {
    require(psm && out, "lps_profile_compute: NULL argument");
    require(phi > 0.0, "lps_profile_compute: need phi > 0");
    require(points >= 2 && emax > emin, "lps_profile_compute: need points >= 2 and emax > emin");
    std::vector<double> grid(static_cast<size_t>(points));
    for (int k = 0; k < points; ++k) grid[k] = emin + (emax - emin) * k / (points - 1);
    *out = new lps_profile{boundary_profile(grid, psm->value, phi)};
  });
}

size_t lps_profile_size(const lps_profile* profile) { return profile ? profile->value.size() : 0; }

lps_status lps_profile_point(const lps_profile* profile, size_t index, double* E, double* w,
                             double* hilbert_w, double* w_S) {
  return guarded([&] {
    require(profile != nullptr, "lps_profile_point: NULL profile");
    const auto& p = profile->value;
    require(index < p.size(), "lps_profile_point: index out of range");
    if (E) *E = p.E[index];
    if (w) *w = p.w[index];
    if (hilbert_w) *hilbert_w = p.hilbert_w[index];
    if (w_S) *w_S = p.w_S[index];
  });
}

size_t lps_profile_edge_count(const lps_profile* profile) {
  return profile ? profile->value.edges.size() : 0;
}

lps_status lps_profile_edge(const lps_profile* profile, size_t index, double* lower,
                            double* upper) {
  return guarded([&] {
    require(profile && lower && upper, "lps_profile_edge: NULL argument");
    require(index < profile->value.edges.size(), "lps_profile_edge: index out of range");
    *lower = profile->value.edges[index].lower;
    *upper = profile->value.edges[index].upper;
  });
}

double lps_profile_atom_at_zero(const lps_profile* profile) {
  return profile ? profile->value.atom_at_zero : 0.0;
}

namespace {

std::string profile_csv_text(const BoundaryProfile& p) {
  std::ostringstream out;
  out << "E,w,hilbert_w,w_S\n";
  for (size_t i = 0; i < p.size(); ++i) {
    out << io::format_double(p.E[i]) << ',' << io::format_double(p.w[i]) << ','
        << io::format_double(p.hilbert_w[i]) << ',' << io::format_double(p.w_S[i]) << '\n';
  }
  return out.str();
}

}  // namespace

lps_status lps_profile_write(const lps_profile* profile, const char* csv_path,
                             const char* json_path) {
  return guarded([&] {
    require(profile != nullptr, "lps_profile_write: NULL profile");
    const auto& p = profile->value;
    if (csv_path) io::write_text(csv_path, profile_csv_text(p));
    if (json_path) {
      json edges = json::array();
      for (const auto& e : p.edges) edges.push_back({e.lower, e.upper});
      size_t flagged = 0;
      for (bool f : p.flagged) flagged += f ? 1 : 0;
      const json sidecar{{"phi", p.phi},
                         {"edges", edges},
                         {"atom_at_zero", p.atom_at_zero},
                         {"flagged_points", flagged}};
      io::write_text(json_path, sidecar.dump(2) + "\n");
    }
  });
}

lps_status lps_profile_csv(const lps_profile* profile, char** out) {
  return guarded([&] {
    require(profile && out, "lps_profile_csv: NULL argument");
    const std::string text = profile_csv_text(profile->value);
    char* buf = static_cast<char*>(std::malloc(text.size() + 1));
    if (!buf) throw std::bad_alloc();
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out = buf;
  });
}

void lps_profile_free(lps_profile* profile) { delete profile; }

void lps_string_free(char* s) { std::free(s); }

lps_status lps_simulate(const lps_psm* psm, double phi, int N, uint64_t seed, const char* out_dir,
                        int write_eigensystem, int* M_out) {
  return guarded([&] {
    require(psm && out_dir, "lps_simulate: NULL argument");
    const auto model = ModelConfig::from_phi(phi, N);
    const auto sigma = PopulationCovariance::from_psm(psm->value, model.M);
    const auto X = sample_data<double>(model, seed);
    const auto cov = sample_cov(sigma, X, write_eigensystem != 0);
    const auto& eig = cov.eigensystem;

    const fs::path dir(out_dir);
    io::ensure_directory(dir);
    std::ostringstream csv;
    csv << "lambda\n";
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
      csv << io::format_double(eig.eigenvalues[i]) << '\n';
    }
    io::write_text(dir / "spectrum.csv", csv.str());

    if (write_eigensystem) {
      const fs::path path = dir / "eigensystem.bin";
      std::ofstream out(path, std::ios::binary);
      if (!out) throw IoError("cannot open " + path.string() + " for writing");
      const char magic[8] = {'L', 'P', 'E', 'I', 'G', '1', '\0', '\0'};
      out.write(magic, 8);
      write_u64(out, static_cast<std::uint64_t>(model.M));
      write_u64(out, static_cast<std::uint64_t>(model.N));
      write_u64(out, seed);
      for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) write_f64(out, eig.eigenvalues[i]);
      for (Eigen::Index r = 0; r < eig.vectors.rows(); ++r) {
        for (Eigen::Index c = 0; c < eig.vectors.cols(); ++c) write_f64(out, eig.vectors(r, c));
      }
      if (!out) throw IoError("write failed: " + path.string());
    }
    if (M_out) *M_out = model.M;
  });
}

lps_status lps_shrink(const lps_psm* psm, double phi, const char* spectrum_csv,
                      const char* out_csv, const char* json_path, lps_shrink_summary* out) {
  return guarded([&] {
    require(psm && spectrum_csv && out_csv, "lps_shrink: NULL argument");
    require(phi > 0.0 && phi < 1.0, "lps_shrink: phi must lie in (0, 1)");
    const auto lambda = io::read_csv_column(spectrum_csv, "lambda");
    require(!lambda.empty(), "lps_shrink: empty spectrum");
    const int M = static_cast<int>(lambda.size());
    const int N = std::max(1, static_cast<int>(std::lround(M / phi)));
    const DeltaCurve curve(shrinkage_profile(psm->value, phi), phi);
    const Eigen::Map<const VectorXd> eigs(lambda.data(), M);
    const auto result = delta_shrink_spectrum(eigs, curve, N);

    std::ostringstream csv;
    csv << "lambda,delta\n";
    for (int i = 0; i < M; ++i) {
      csv << io::format_double(lambda[i]) << ',' << io::format_double(result.dhat[i]) << '\n';
    }
    io::write_text(out_csv, csv.str());

    lps_shrink_summary s{eigs.sum(), result.dhat.sum(), result.clamped_count,
                         result.flagged_count, M};
    if (json_path) {
      const json j{{"trace_in", s.trace_in},
                   {"trace_out", s.trace_out},
                   {"clamped_count", s.clamped_count},
                   {"flagged_count", s.flagged_count},
                   {"count", s.count}};
      io::write_text(json_path, j.dump(2) + "\n");
    }
    if (out) *out = s;
  });
}

lps_status lps_verify(const lps_experiment* c, const char* out_dir, lps_run_summary* out) {
  return guarded([&] {
    const auto config = to_config(c, true);
    require(config.law == Law::BottomTrace || config.law == Law::TopTrace ||
                config.law == Law::Entrywise || config.law == Law::Identities,
            "verify: law must be bottom-trace, top-trace, entrywise or identities");
    const auto table =
        config.law == Law::Entrywise ? entrywise_pair_table(config) : run_experiment(config);
    write_plain_run(config, table, out_dir, "residual", "psi_or_bound");
    fill_summary(out, table);
  });
}

lps_status lps_measure_distance(const lps_experiment* c, const char* which, const char* out_dir,
                                lps_run_summary* out) {
  return guarded([&] {
    require(which != nullptr, "measure-distance: which is NULL");
    const std::string w(which);
    require(w == "mu" || w == "nu", "measure-distance: which must be mu or nu");
    lps_experiment copy = *c;
    copy.law = w == "mu" ? "mu-interval" : "nu-interval";
    const auto config = to_config(&copy, true);
    const auto table = run_experiment(config);
    write_plain_run(config, table, out_dir, "distance", "");
    fill_summary(out, table);
  });
}

lps_status lps_rate(const lps_experiment* c, double epsilon, const char* out_dir,
                    lps_run_summary* out) {
  return guarded([&] {
    require(out_dir != nullptr, "rate: output directory is NULL");
    require(epsilon > 0.0, "rate: need epsilon > 0");
    const auto config = to_config(c, true);
    require(config.n_list.size() >= 2, "rate: need at least 2 N values");
    RunRecord record{config, run_experiment(config), std::nullopt, std::nullopt, std::nullopt};
    record.fit = fit_rate(*record.residuals);
    record.dominance = dominance_check(*record.residuals, epsilon);
    persist_run(record, out_dir);
    fill_summary(out, *record.residuals);
    if (out) {
      out->has_fit = 1;
      out->slope = record.fit->slope;
      out->intercept = record.fit->intercept;
      out->stderr_slope = record.fit->stderr_slope;
      out->dominance_passed = record.dominance->passed ? 1 : 0;
    }
  });
}

lps_status lps_losses(const lps_experiment* c, const char* out_dir, lps_run_summary* out) {
  return guarded([&] {
    require(out_dir != nullptr, "losses: output directory is NULL");
    const auto config = to_config(c, false);
    RunRecord record{config, std::nullopt, loss_comparison(config), std::nullopt, std::nullopt};
    persist_run(record, out_dir);
    if (out) {
      *out = lps_run_summary{};
      out->rows = record.losses->rows.size();
      out->failures = record.losses->failures.size();
      out->dominance_passed = -1;
      out->optimality_violations = record.losses->optimality_violations;
    }
  });
}

}  // extern "C"
