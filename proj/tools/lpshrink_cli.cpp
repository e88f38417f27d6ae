// lpshrink command-line front end. Every subcommand is a thin adapter over the
// C API in liblpshrink; no numerical work happens here.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpshrink/lpshrink.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parses RE+IMi / RE-IMi (no spaces); a bare imaginary part "IMi" is also accepted.
std::pair<double, double> parse_complex(std::string_view text) {
  auto fail = [&] { return UsageError("invalid complex number '" + std::string(text) + "' (expected RE+IMi)"); };
  if (text.size() < 2 || text.back() != 'i') throw fail();
  const std::string_view body = text.substr(0, text.size() - 1);
  std::size_t split = std::string_view::npos;
  for (std::size_t k = body.size(); k-- > 1;) {
    if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  auto number = [&](std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) throw fail();
    return v;
  };
  if (split == std::string_view::npos) return {0.0, number(body)};
  std::string_view im = body.substr(split);
  const double sign = im.front() == '-' ? -1.0 : 1.0;
  im.remove_prefix(1);
  return {number(body.substr(0, split)), sign * (im.empty() ? 1.0 : number(im))};
}

std::vector<int> parse_n_list(const std::string& text) {
  std::vector<int> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc{} || ptr != item.data() + item.size() || item.empty()) {
      throw UsageError("invalid N list '" + text + "'");
    }
    out.push_back(v);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (out.empty()) throw UsageError("empty N list");
  return out;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("LP_SEED");
  if (!env || !*env) return 0;
  std::uint64_t v = 0;
  const std::string_view s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw UsageError("LP_SEED must be an unsigned integer, got '" + std::string(s) + "'");
  }
  return v;
}

int exit_code(lps_status status) {
  switch (status) {
    case LPS_OK: return 0;
    case LPS_ERR_DOMAIN:
    case LPS_ERR_IO: return 1;
    case LPS_ERR_NUMERIC:
    case LPS_ERR_INTERNAL: return 2;
  }
  return 2;
}

const char* status_name(lps_status status) {
  switch (status) {
    case LPS_OK: return "ok";
    case LPS_ERR_DOMAIN: return "domain";
    case LPS_ERR_NUMERIC: return "numeric";
    case LPS_ERR_IO: return "io";
    case LPS_ERR_INTERNAL: return "internal";
  }
  return "internal";
}

struct ApiError {
  lps_status status;
};

void check(lps_status status) {
  if (status != LPS_OK) throw ApiError{status};
}

class PsmHandle {
 public:
  explicit PsmHandle(const std::string& path) {
    check(path.empty() ? lps_psm_identity(&psm_) : lps_psm_load(path.c_str(), &psm_));
  }
  ~PsmHandle() { lps_psm_free(psm_); }
  PsmHandle(const PsmHandle&) = delete;
  PsmHandle& operator=(const PsmHandle&) = delete;
  const lps_psm* get() const { return psm_; }

 private:
  lps_psm* psm_ = nullptr;
};

// ---- config files ----------------------------------------------------------

// `key = value` lines become `--key=value` tokens placed ahead of the real
// flags; every option takes its last value, so command-line flags win.
std::vector<std::string> expand_config(std::vector<std::string> args, CLI::App& app) {
  std::optional<std::string> path;
  for (std::size_t k = 1; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      path = args[k + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(k), args.begin() + static_cast<std::ptrdiff_t>(k) + 2);
      break;
    }
    if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(k));
      break;
    }
  }
  std::size_t sub_pos = args.size();
  for (std::size_t k = 1; k < args.size(); ++k) {
    if (!args[k].empty() && args[k][0] != '-') {
      sub_pos = k;
      break;
    }
  }
  if (!path) return args;
  if (sub_pos >= args.size()) throw UsageError("--config needs a subcommand");
  CLI::App* sub = app.get_subcommand_no_throw(args[sub_pos]);
  if (!sub) throw UsageError("unknown subcommand '" + args[sub_pos] + "'");

  std::ifstream in(*path);
  if (!in) throw UsageError("cannot read config file " + *path);
  std::vector<std::string> injected;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(*path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key == "config" || key == "help" || !sub->get_option_no_throw("--" + key)) {
      throw UsageError(*path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                       "' for " + sub->get_name());
    }
    injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, injected.begin(),
              injected.end());
  return args;
}

void echo_config(const CLI::App& sub) {
  std::cerr << "# " << sub.get_name() << '\n';
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      value = opt->results().back();
    } else {
      value = opt->get_default_str();
    }
    std::cerr << name << " = " << value << '\n';
  }
}

// ---- subcommand state --------------------------------------------------------

struct Common {
  std::string psm;
  double phi = 0.5;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct ExperimentArgs {
  std::string law;
  std::string n_list = "64,128,256,512,1024";
  std::string z = "1+1i";
  int reps = 100;
  int grid = 200;
  std::string out;
};

lps_experiment make_experiment(const Common& c, const ExperimentArgs& e, const PsmHandle& psm,
                               const std::vector<int>& ns) {
  const auto [re, im] = parse_complex(e.z);
  lps_experiment x{};
  x.law = e.law.c_str();
  x.psm = psm.get();
  x.psm_file = c.psm.c_str();
  x.phi = c.phi;
  x.z_re = re;
  x.z_im = im;
  x.n_list = ns.data();
  x.n_count = ns.size();
  x.replicates = e.reps;
  x.seed = c.seed;
  x.grid_size = e.grid;
  x.threads = c.threads;
  return x;
}

void add_common(CLI::App* sub, Common& c, bool seed, bool threads) {
  sub->add_option("--psm", c.psm, "Population spectral measure CSV (tau,weight); identity if omitted")
      ->check(CLI::ExistingFile);
  sub->add_option("--phi", c.phi, "Aspect ratio M/N");
  if (seed) sub->add_option("--seed", c.seed, "Master seed (default: $LP_SEED or 0)");
  if (threads) sub->add_option("--threads", c.threads, "Worker threads (0: all cores)");
}

void print_run_summary(const std::string& out, const lps_run_summary& s) {
  json j{{"run_dir", out}, {"rows", s.rows}, {"failures", s.failures}};
  if (s.has_fit) {
    j["slope"] = s.slope;
    j["intercept"] = s.intercept;
    j["stderr"] = s.stderr_slope;
  }
  if (s.dominance_passed >= 0) j["dominance_passed"] = s.dominance_passed == 1;
  if (s.optimality_violations > 0) j["optimality_violations"] = s.optimality_violations;
  std::cout << j.dump() << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"lpshrink: nonlinear shrinkage and local-law Monte Carlo toolkit"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(lps_version()));
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "More log output (repeatable)");
  app.add_flag("-q,--quiet", "Errors only");
  std::string config_path;
  app.add_option("--config", config_path, "File of key = value lines; flags override it");

  Common common;
  common.seed = default_seed();
  ExperimentArgs exp;

  // solve-m
  auto* solve = app.add_subcommand("solve-m", "Solve the self-consistent equation at z");
  std::string z_text;
  double tol = 1e-12;
  solve->add_option("--z", z_text, "Spectral parameter RE+IMi")->required();
  add_common(solve, common, false, false);
  solve->add_option("--tol", tol, "Relative residual tolerance");

  // density
  auto* density = app.add_subcommand("density", "Boundary densities on a grid");
  double emin = 0.0, emax = 4.0;
  int points = 400;
  std::string density_out, sidecar;
  add_common(density, common, false, false);
  density->add_option("--emin", emin, "Grid start");
  density->add_option("--emax", emax, "Grid end");
  density->add_option("--points", points, "Grid size");
  density->add_option("--out", density_out, "CSV path (stdout if omitted)");
  density->add_option("--sidecar", sidecar, "JSON sidecar path (default: --out with .json)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Sample S and write its spectrum");
  int sim_n = 512;
  std::string sim_out;
  bool eigensystem = false;
  add_common(simulate, common, true, false);
  simulate->add_option("--n", sim_n, "Sample size N");
  simulate->add_option("--out", sim_out, "Output directory")->required();
  simulate->add_flag("--eigensystem", eigensystem, "Also write eigensystem.bin");

  // shrink
  auto* shrink = app.add_subcommand("shrink", "Apply delta to a sample spectrum");
  std::string spectrum, shrink_out, shrink_json;
  shrink->add_option("--spectrum", spectrum, "CSV with column lambda")->required();
  add_common(shrink, common, false, false);
  shrink->add_option("--out", shrink_out, "Output CSV lambda,delta")->required();
  shrink->add_option("--json", shrink_json, "Summary JSON path (default: --out with .json)");

  // verify / measure-distance / rate / losses
  auto add_experiment = [&](CLI::App* sub, bool law, bool z, bool grid) {
    add_common(sub, common, true, true);
    if (law) sub->add_option("--law", exp.law, "Residual law")->required();
    sub->add_option("--n", exp.n_list, "Comma-separated N list");
    if (z) sub->add_option("--z", exp.z, "Spectral parameter RE+IMi");
    sub->add_option("--reps", exp.reps, "Replicates per N");
    if (grid) sub->add_option("--grid", exp.grid, "Interval endpoint grid size");
    sub->add_option("--out", exp.out, "Run directory")->required();
  };
  auto* verify = app.add_subcommand("verify", "Residual sweep for a local law");
  add_experiment(verify, true, true, false);
  auto* distance = app.add_subcommand("measure-distance", "Sup-interval distances of mu or nu");
  std::string which;
  distance->add_option("--which", which, "mu or nu")->required()->check(CLI::IsMember({"mu", "nu"}));
  add_experiment(distance, false, false, true);
  auto* rate = app.add_subcommand("rate", "Rate fit and dominance check for a law");
  double epsilon = 0.2;
  add_experiment(rate, true, true, true);
  rate->add_option("--epsilon", epsilon, "Dominance exponent");
  auto* losses = app.add_subcommand("losses", "MV losses of sample, scalar, delta and oracle");
  add_experiment(losses, false, false, false);

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = expand_config(std::move(args), app);
  } catch (const UsageError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  lps_set_log_level(app.count("--quiet") ? 4 : std::max(0, 2 - verbosity));
  CLI::App* sub = app.get_subcommands().front();
  echo_config(*sub);

  try {
    if (sub == solve) {
      const auto [re, im] = parse_complex(z_text);
      PsmHandle psm(common.psm);
      lps_solution s{};
      check(lps_solve_m(psm.get(), common.phi, re, im, tol, &s));
      std::cout << json{{"z", {re, im}},
                        {"m", {s.m_re, s.m_im}},
                        {"residual", s.residual},
                        {"iterations", s.iterations}}
                       .dump()
                << '\n';
    } else if (sub == density) {
      PsmHandle psm(common.psm);
      lps_profile* profile = nullptr;
      check(lps_profile_compute(psm.get(), common.phi, emin, emax, points, &profile));
      std::unique_ptr<lps_profile, decltype(&lps_profile_free)> guard(profile, &lps_profile_free);
      if (sidecar.empty() && !density_out.empty()) {
        sidecar = fs::path(density_out).replace_extension(".json").string();
      }
      if (density_out.empty()) {
        char* text = nullptr;
        check(lps_profile_csv(profile, &text));
        std::cout << text;
        lps_string_free(text);
        if (!sidecar.empty()) check(lps_profile_write(profile, nullptr, sidecar.c_str()));
      } else {
        check(lps_profile_write(profile, density_out.c_str(), sidecar.c_str()));
        std::cout << density_out << '\n';
      }
    } else if (sub == simulate) {
      PsmHandle psm(common.psm);
      int M = 0;
      check(lps_simulate(psm.get(), common.phi, sim_n, common.seed, sim_out.c_str(),
                         eigensystem ? 1 : 0, &M));
      std::cout << json{{"out", sim_out}, {"M", M}, {"N", sim_n}, {"seed", common.seed}}.dump()
                << '\n';
    } else if (sub == shrink) {
      PsmHandle psm(common.psm);
      if (shrink_json.empty()) shrink_json = fs::path(shrink_out).replace_extension(".json").string();
      lps_shrink_summary s{};
      check(lps_shrink(psm.get(), common.phi, spectrum.c_str(), shrink_out.c_str(),
                       shrink_json.c_str(), &s));
      std::cout << json{{"trace_in", s.trace_in},
                        {"trace_out", s.trace_out},
                        {"clamped_count", s.clamped_count},
                        {"flagged_count", s.flagged_count}}
                       .dump()
                << '\n';
    } else {
      PsmHandle psm(common.psm);
      const auto ns = parse_n_list(exp.n_list);
      if (sub == distance) exp.law = which == "mu" ? "mu-interval" : "nu-interval";
      const lps_experiment x = make_experiment(common, exp, psm, ns);
      lps_run_summary s{};
      if (sub == verify) {
        check(lps_verify(&x, exp.out.c_str(), &s));
      } else if (sub == distance) {
        check(lps_measure_distance(&x, which.c_str(), exp.out.c_str(), &s));
      } else if (sub == rate) {
        check(lps_rate(&x, epsilon, exp.out.c_str(), &s));
      } else {
        check(lps_losses(&x, exp.out.c_str(), &s));
      }
      print_run_summary(exp.out, s);
    }
  } catch (const UsageError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const ApiError& e) {
    std::cerr << json{{"error", status_name(e.status)}, {"message", lps_last_error()}}.dump()
              << '\n';
    return exit_code(e.status);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
}
