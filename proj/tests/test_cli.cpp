#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

// stderr is discarded; the CLI echoes its resolved configuration there.
Run cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" LPSHRINK_CLI "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "lpshrink_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(cli("--help").code == 0);
  CHECK(cli("rate --help").code == 0);
  CHECK(cli("").code == 1);
  CHECK(cli("solve-m").code == 1);
  CHECK(cli("solve-m --z banana").code == 1);
  CHECK(cli("solve-m --z 1+1i --phi -1").code == 1);
  CHECK(cli("solve-m --z 1-1i").code == 1);
  CHECK(cli("solve-m --psm /nonexistent.csv --z 1+1i").code == 1);
  CHECK(cli("rate --law bottom-trace --out x --n 64", "LP_SEED=notanumber").code == 1);
}

TEST_CASE("solve-m prints JSON") {
  const auto r = cli("solve-m --z 0+1i --phi 0.5");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("\"m\":[0.193030412") != std::string::npos);
  CHECK(r.out.find(",0.791101794") != std::string::npos);
  CHECK(cli("solve-m --z nan+1i").code == 1);

  // A tolerance below rounding level cannot be met: numeric failure.
  const auto err = cli("solve-m --z 0.3+0.7i --tol 1e-300");
  CHECK(err.code == 2);
}

TEST_CASE("density to stdout and to files") {
  const auto r = cli("density --phi 0.5 --emin 0 --emax 3 --points 31");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("E,w,hilbert_w,w_S\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 32);

  const auto dir = scratch("density");
  fs::create_directories(dir);
  REQUIRE(cli("density --points 31 --out " + (dir / "d.csv").string()).code == 0);
  CHECK(fs::exists(dir / "d.json"));
}

TEST_CASE("simulate, shrink") {
  const auto dir = scratch("sim");
  REQUIRE(cli("simulate --n 40 --seed 3 --eigensystem --out " + dir.string()).code == 0);
  CHECK(fs::exists(dir / "spectrum.csv"));
  CHECK(fs::exists(dir / "eigensystem.bin"));
  const auto r = cli("shrink --spectrum " + (dir / "spectrum.csv").string() + " --out " +
                     (dir / "shrunk.csv").string());
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "shrunk.json"));
}

TEST_CASE("config files and flags agree; reruns are identical") {
  const auto base = scratch("config");
  fs::create_directories(base);
  {
    std::ofstream cfg(base / "run.cfg");
    cfg << "# sweep\nlaw = top-trace\nn = 32,64\nreps = 3\nseed = 17\nz = 1+0.5i\n";
  }
  const auto a = base / "a", b = base / "b", c = base / "c";
  REQUIRE(cli("rate --config " + (base / "run.cfg").string() + " --out " + a.string()).code == 0);
  REQUIRE(cli("rate --law top-trace --n 32,64 --reps 3 --seed 17 --z 1+0.5i --out " + b.string()).code == 0);
  REQUIRE(cli("--config " + (base / "run.cfg").string() + " rate --out " + c.string()).code == 0);
  CHECK(slurp(a / "results.csv") == slurp(b / "results.csv"));
  CHECK(slurp(a / "results.csv") == slurp(c / "results.csv"));
  CHECK(slurp(a / "config.json") == slurp(b / "config.json"));

  // Flags override the file.
  const auto d = base / "d";
  REQUIRE(cli("rate --config " + (base / "run.cfg").string() + " --seed 18 --out " + d.string()).code == 0);
  CHECK(slurp(a / "results.csv") != slurp(d / "results.csv"));

  // LP_SEED supplies the default seed.
  const auto e = base / "e";
  REQUIRE(cli("rate --law top-trace --n 32,64 --reps 3 --z 1+0.5i --out " + e.string(), "LP_SEED=17").code == 0);
  CHECK(slurp(a / "results.csv") == slurp(e / "results.csv"));

  {
    std::ofstream bad(base / "bad.cfg");
    bad << "colour = blue\n";
  }
  CHECK(cli("rate --config " + (base / "bad.cfg").string() + " --law top-trace --out " + (base / "f").string()).code == 1);
  CHECK(cli("rate --config /nonexistent.cfg --law top-trace --out " + (base / "g").string()).code == 1);
}

TEST_CASE("remaining subcommands") {
  const auto dir = scratch("runs");
  CHECK(cli("verify --law identities --n 16 --reps 2 --out " + (dir / "v").string()).code == 0);
  CHECK(slurp(dir / "v" / "results.csv").rfind("n,seed,residual,psi_or_bound\n", 0) == 0);
  CHECK(cli("verify --law mu-interval --n 16 --reps 2 --out " + (dir / "w").string()).code == 1);
  CHECK(cli("measure-distance --which mu --n 32,64 --reps 2 --out " + (dir / "m").string()).code == 0);
  CHECK(cli("losses --n 32 --reps 2 --out " + (dir / "l").string()).code == 0);
  CHECK(slurp(dir / "l" / "results.csv").rfind("n,seed,estimator,mv_loss\n", 0) == 0);
}
