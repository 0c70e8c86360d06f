#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <koopid/archive.hpp>
#include <koopid/error.hpp>
#include <koopid/series_csv.hpp>

#include "commands.hpp"
#include "config.hpp"

namespace fs = std::filesystem;
using namespace koopid;
using namespace koopid::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("koopid_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Numeric body of a result table (header dropped).
std::vector<std::vector<double>> table(const fs::path& path) {
  std::vector<std::vector<double>> rows;
  const auto ls = lines(path);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    std::vector<double> row;
    std::stringstream ss(ls[i]);
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

struct Run {
  int code;
  std::string log;
  std::string err;
};

Run run(const std::string& cmd, const fs::path& config, const fs::path& out,
        std::optional<fs::path> model = std::nullopt, std::optional<fs::path> data = std::nullopt,
        std::optional<std::uint64_t> seed = std::nullopt) {
  CommandPaths p;
  p.out = out;
  p.model = model;
  p.data = data;
  p.threads = 1;
  std::ostringstream log, err;
  const int code = run_command(cmd, config, seed, p, log, err);
  return {code, log.str(), err.str()};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(KOOPID_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kDuffing = R"(seed = 1
[system]
kind = duffing
duration = 1000
[input]
kind = random
lo = -1.5
hi = 1.5
hold = 5
[dictionary]
z = 1
lift = polynomial
min_degree = 2
max_degree = 4
scope = all
[fit]
family = nonlinear_controlled
[predict]
steps = 50
[analysis]
task = basins
x1_count = 41
x2_count = 41
horizon = 600
)";

// Hopf spiralling out from near the origin, no input.
const char* kHopf = R"(seed = 3
[system]
kind = hopf
duration = 200
dt = 0.1
x0 = 0.1, 0
[input]
kind = none
[dictionary]
z = 10
lift = polynomial
min_degree = 2
max_degree = 3
scope = all
[fit]
family = nonlinear
rank = 20
[analysis]
task = cycle
transient = 1000
max_steps = 3000
start = 1500
)";

// y' = 0.5 y + 0.2 y^2 + 0.3 u, exactly in the degree-2 dictionary.
ObservableSeries realizable_series(Index samples) {
  Matrix y(1, samples), u(1, samples);
  double v = 0.1;
  for (Index k = 0; k < samples; ++k) {
    const double uk = 0.4 * std::sin(0.37 * static_cast<double>(k)) + 0.2 * std::cos(1.3 * static_cast<double>(k));
    y(0, k) = v;
    u(0, k) = uk;
    v = 0.5 * v + 0.2 * v * v + 0.3 * uk;
  }
  return ObservableSeries(y, u, 0.1);
}

} // namespace

TEST_CASE("config rejects unknown sections and keys", "[cli][config]") {
  CHECK_THROWS_AS(parse_config("[system]\nkind = duffing\ncolour = red\n"), FormatError);
  CHECK_THROWS_AS(parse_config("[systems]\nkind = duffing\n"), FormatError);
  CHECK_THROWS_AS(parse_config("sead = 3\n"), FormatError);
  CHECK_THROWS_AS(parse_config("[fit]\nrank = -2\n"), FormatError);
  CHECK_THROWS_AS(parse_config("[fit]\nfamily = kalman\n"), FormatError);
  CHECK_THROWS_AS(parse_config("[dictionary]\nscope = some\n"), FormatError);
  CHECK_THROWS_AS(parse_config("[system]\nkind = external-csv\npath = /nonexistent/x.csv\n"), FormatError);
  const RunConfig c = parse_config(kDuffing);
  CHECK(c.seed == 1);
  CHECK(c.dictionary.z == 1);
  CHECK(c.fit.family == FamilyTag::NonlinearControlled);
}

TEST_CASE("config errors exit with code 1", "[cli]") {
  const fs::path dir = scratch("bad_config");
  const fs::path cfg = write_text(dir / "bad.ini", "[system]\nkind = pendulum\n");
  CHECK(run("simulate", cfg, dir).code == kExitUsage);
  CHECK(run_binary("simulate -c " + cfg.string() + " -o " + dir.string()) == 1);
  CHECK(run_binary("simulate") == 1);
  CHECK(run_binary("frobnicate -c " + cfg.string()) == 1);
}

TEST_CASE("simulate duffing: 1000 time units give 10001 rows", "[cli][simulate]") {
  const fs::path dir = scratch("sim_duffing");
  const fs::path cfg = write_text(dir / "duffing.ini", kDuffing);
  REQUIRE(run("simulate", cfg, dir).code == kExitOk);
  const auto ls = lines(dir / "series.csv");
  REQUIRE(ls.size() == 10002);
  CHECK(ls[0] == "t,y1,u1");
  CHECK(fs::exists(dir / "series.json"));
  CHECK(slurp(dir / "series.json").find("\"seed\"") != std::string::npos);
}

TEST_CASE("simulate hopf: T=50, dt=0.05 gives 1001 rows of t,y,u", "[cli][simulate]") {
  const fs::path dir = scratch("sim_hopf");
  const fs::path cfg =
      write_text(dir / "hopf.ini", "seed = 4\n[system]\nkind = hopf\nduration = 50\ndt = 0.05\n[input]\nhold = 1\n");
  REQUIRE(run("simulate", cfg, dir).code == kExitOk);
  const auto rows = table(dir / "series.csv");
  REQUIRE(rows.size() == 1001);
  for (const auto& r : rows) REQUIRE(r.size() == 3);
  CHECK(rows.back()[0] == Catch::Approx(50.0));
}

TEST_CASE("every subcommand is deterministic in (config, seed)", "[cli][determinism]") {
  const fs::path dir = scratch("determinism");
  const fs::path cfg = write_text(dir / "duffing.ini", kDuffing);
  std::vector<std::string> outputs[3];
  for (int k = 0; k < 3; ++k) {
    const fs::path out = dir / ("run" + std::to_string(k));
    const std::optional<std::uint64_t> seed = k == 2 ? std::optional<std::uint64_t>(9) : std::nullopt;
    REQUIRE(run("simulate", cfg, out, std::nullopt, std::nullopt, seed).code == kExitOk);
    REQUIRE(run("fit", cfg, out, std::nullopt, out / "series.csv").code == kExitOk);
    REQUIRE(run("predict", cfg, out, out / "model.kpa", out / "series.csv").code == kExitOk);
    for (const char* f : {"series.csv", "model.kpa", "prediction.csv", "error.csv"}) {
      outputs[k].push_back(slurp(out / f));
    }
  }
  CHECK(outputs[0] == outputs[1]);
  CHECK(outputs[0][0] != outputs[2][0]);
  CHECK(outputs[0][1] != outputs[2][1]);
}

TEST_CASE("fit duffing recipe: L=12, M_c=3", "[cli][fit]") {
  const fs::path dir = scratch("fit_duffing");
  const fs::path cfg = write_text(dir / "duffing.ini", kDuffing);
  REQUIRE(run("simulate", cfg, dir).code == kExitOk);
  const Run r = run("fit", cfg, dir, std::nullopt, dir / "series.csv");
  REQUIRE(r.code == kExitOk);
  CHECK(r.log.find("residual") != std::string::npos);
  CHECK(r.log.find("snapshots  9999") != std::string::npos);

  const ModelBundle b = load_model(dir / "model.kpa");
  CHECK(b.model.dictionary().lift_dim() == 12);
  CHECK(b.model.dictionary().state_dim() == 3);
  CHECK(b.model.tag() == FamilyTag::NonlinearControlled);

  SECTION("basins over a 41 x 41 grid give 1681 rows") {
    const Run a = run("analyze", cfg, dir, dir / "model.kpa");
    REQUIRE(a.code == kExitOk);
    const auto rows = table(dir / "basins.csv");
    REQUIRE(rows.size() == 1681);
    CHECK(lines(dir / "basins.csv")[0] == "x1,x2,label");
    CHECK(rows.front()[0] == -2.0);
    CHECK(rows.back()[1] == 2.0);
  }
  SECTION("prc without a limit cycle is a numerical failure") {
    const std::string text = std::string(kDuffing);
    const fs::path p2 =
        write_text(dir / "prc2.ini", text.substr(0, text.find("[analysis]")) + "[analysis]\ntask = prc\ninit_value = 0.5\n");
    CHECK(run("analyze", p2, dir, dir / "model.kpa").code == kExitNumerical);
    CHECK(run_binary("analyze -c " + p2.string() + " -m " + (dir / "model.kpa").string() + " -o " + dir.string()) ==
          2);
  }
  SECTION("spectrum on a nonlinear model is a family mismatch") {
    const std::string text = std::string(kDuffing);
    const fs::path p2 =
        write_text(dir / "spec.ini", text.substr(0, text.find("[analysis]")) + "[analysis]\ntask = spectrum\n");
    const Run a = run("analyze", p2, dir, dir / "model.kpa", dir / "series.csv");
    CHECK(a.code == kExitUsage);
    CHECK(a.err.find("linear") != std::string::npos);
    const fs::path p3 =
        write_text(dir / "task.ini", text.substr(0, text.find("[analysis]")) + "[analysis]\ntask = bifurcation\n");
    CHECK(run("analyze", p3, dir, dir / "model.kpa").code == kExitUsage);
  }
}

TEST_CASE("fit burgers recipe: L=1750, M_c=680", "[cli][fit]") {
  const fs::path dir = scratch("fit_burgers");
  const fs::path cfg = write_text(dir / "burgers.ini", R"(seed = 2
[system]
kind = burgers
duration = 40
[input]
lo = -0.5
hi = 0.5
hold = 20
[dictionary]
z = 30
lift = polynomial
min_degree = 2
max_degree = 3
scope = latest
[fit]
family = nonlinear_controlled
rank = 80
)");
  REQUIRE(run("simulate", cfg, dir).code == kExitOk);
  const Run r = run("fit", cfg, dir, std::nullopt, dir / "series.csv");
  REQUIRE(r.code == kExitOk);
  // Rank 80 is capped at the numerical rank of this short record.
  const auto at = r.log.find("rank       ");
  REQUIRE(at != std::string::npos);
  const int rank = std::stoi(r.log.substr(at + 11));
  CHECK(rank > 0);
  CHECK(rank <= 80);
  const ModelBundle b = load_model(dir / "model.kpa");
  CHECK(b.model.dictionary().lift_dim() == 1750);
  CHECK(b.model.dictionary().state_dim() == 680);
}

TEST_CASE("predict: zero steps score the seed state against itself", "[cli][predict]") {
  const fs::path dir = scratch("predict_zero");
  write_series_csv(dir / "data.csv", realizable_series(200));
  const fs::path cfg = write_text(dir / "p.ini", R"([system]
kind = external-csv
path = data.csv
[dictionary]
z = 2
lift = polynomial
min_degree = 2
max_degree = 2
[fit]
family = nonlinear_controlled
[predict]
steps = 0
)");
  REQUIRE(run("fit", cfg, dir, std::nullopt, dir / "data.csv").code == kExitOk);
  REQUIRE(run("predict", cfg, dir, dir / "model.kpa", dir / "data.csv").code == kExitOk);
  const auto err = table(dir / "error.csv");
  REQUIRE(err.size() == 1);
  CHECK(err[0][1] == 0.0);
  CHECK(table(dir / "prediction.csv").size() == 1);
}

TEST_CASE("predict: realizable data is reproduced to 1e-6 over 100 steps", "[cli][predict]") {
  const fs::path dir = scratch("predict_realizable");
  write_series_csv(dir / "data.csv", realizable_series(400));
  const fs::path cfg = write_text(dir / "p.ini", R"([system]
kind = external-csv
path = data.csv
[dictionary]
z = 0
lift = polynomial
min_degree = 2
max_degree = 2
[fit]
family = nonlinear_controlled
[predict]
start = 150
steps = 100
)");
  REQUIRE(run("fit", cfg, dir, std::nullopt, dir / "data.csv").code == kExitOk);
  const Run r = run("predict", cfg, dir, dir / "model.kpa", dir / "data.csv");
  REQUIRE(r.code == kExitOk);
  const auto err = table(dir / "error.csv");
  REQUIRE(err.size() == 101);
  double worst = 0.0;
  for (const auto& row : err) worst = std::max(worst, row[1]);
  CHECK(worst <= 1e-6);

  SECTION("history shorter than z or a window past the data is rejected") {
    const fs::path long_cfg = write_text(dir / "long.ini", R"([system]
kind = external-csv
path = data.csv
[predict]
start = 350
steps = 100
)");
    CHECK(run("predict", long_cfg, dir, dir / "model.kpa", dir / "data.csv").code == kExitUsage);
    CHECK(run("predict", long_cfg, dir, dir / "model.kpa").code == kExitUsage);
  }
}

TEST_CASE("predict: divergent rollout exits 2 after writing partial output", "[cli][predict]") {
  const fs::path dir = scratch("predict_diverge");
  // Doubling map in the training window, then a long flat tail to score against.
  Matrix y = Matrix::Zero(1, 1200);
  for (Index k = 0; k < 30; ++k) y(0, k) = std::ldexp(1.0, static_cast<int>(k));
  write_series_csv(dir / "train.csv", ObservableSeries(y.leftCols(30), std::nullopt, 1.0));
  write_series_csv(dir / "test.csv", ObservableSeries(Matrix::Constant(1, 1200, 1.0), std::nullopt, 1.0));
  const fs::path cfg = write_text(dir / "p.ini", R"([system]
kind = external-csv
path = train.csv
[fit]
family = dmd
[predict]
start = 0
steps = 1000
)");
  REQUIRE(run("fit", cfg, dir, std::nullopt, dir / "train.csv").code == kExitOk);
  const Run r = run("predict", cfg, dir, dir / "model.kpa", dir / "test.csv");
  CHECK(r.code == kExitNumerical);
  CHECK(r.err.find("diverged") != std::string::npos);
  const auto pred = table(dir / "prediction.csv");
  CHECK(pred.size() > 300);
  CHECK(pred.size() < 1001);
  CHECK(run_binary("predict -c " + cfg.string() + " -m " + (dir / "model.kpa").string() + " -d " +
                   (dir / "test.csv").string() + " -o " + dir.string()) == 2);
}

TEST_CASE("analyze cycle and spectrum on Hopf data", "[cli][analyze]") {
  const fs::path dir = scratch("hopf");
  const fs::path cfg = write_text(dir / "hopf.ini", kHopf);
  REQUIRE(run("simulate", cfg, dir).code == kExitOk);
  CHECK(lines(dir / "series.csv")[0] == "t,y1");
  REQUIRE(run("fit", cfg, dir / "nl", std::nullopt, dir / "series.csv").code == kExitOk);

  const Run c = run("analyze", cfg, dir / "nl", dir / "nl" / "model.kpa", dir / "series.csv");
  REQUIRE(c.code == kExitOk);
  const auto summary = table(dir / "nl" / "cycle_summary.csv");
  REQUIRE(summary.size() == 1);
  CHECK(lines(dir / "nl" / "cycle_summary.csv")[0] == "period,transient,converged,amplitude");
  CHECK(summary[0][2] == 1.0);
  CHECK(summary[0][0] == Catch::Approx(5.0).epsilon(0.01));
  const auto orbit = table(dir / "nl" / "cycle_orbit.csv");
  REQUIRE(orbit.size() >= 49);
  CHECK(orbit.size() <= 51);
  CHECK(orbit.front()[1] >= 0.0);
  CHECK(orbit.back()[1] < 2.0 * 3.14159265358979);
  for (std::size_t j = 1; j < orbit.size(); ++j) CHECK(orbit[j][1] > orbit[j - 1][1]);

  const std::string text = kHopf;
  const fs::path dmd_cfg =
      write_text(dir / "dmd.ini", text.substr(0, text.find("[fit]")) + "[fit]\nfamily = dmd\n[analysis]\ntask = spectrum\n");
  REQUIRE(run("fit", dmd_cfg, dir / "dmd", std::nullopt, dir / "series.csv").code == kExitOk);
  REQUIRE(run("analyze", dmd_cfg, dir / "dmd", dir / "dmd" / "model.kpa", dir / "series.csv").code == kExitOk);
  CHECK(lines(dir / "dmd" / "spectrum.csv")[0] == "re,im,frequency,amplitude");
  const auto spec = table(dir / "dmd" / "spectrum.csv");
  REQUIRE(spec.size() == 11);
  for (std::size_t j = 1; j < spec.size(); ++j) CHECK(spec[j][3] <= spec[j - 1][3]);
  CHECK(run("analyze", dmd_cfg, dir / "dmd", dir / "dmd" / "model.kpa").code == kExitUsage);
}

TEST_CASE("fixed point of a fitted duffing-like map", "[cli][analyze]") {
  const fs::path dir = scratch("fixed_point");
  write_series_csv(dir / "data.csv", realizable_series(300));
  const fs::path cfg = write_text(dir / "p.ini", R"([system]
kind = external-csv
path = data.csv
[dictionary]
lift = polynomial
min_degree = 2
max_degree = 2
[fit]
family = nonlinear_controlled
[analysis]
task = fixed-point
guess = 0.1
)");
  REQUIRE(run("fit", cfg, dir, std::nullopt, dir / "data.csv").code == kExitOk);
  REQUIRE(run("analyze", cfg, dir, dir / "model.kpa").code == kExitOk);
  const auto fp = table(dir / "fixed_point.csv");
  REQUIRE(fp.size() == 1);
  CHECK(fp[0][1] == Catch::Approx(0.0).margin(1e-8));
  const auto eig = table(dir / "fixed_point_eigenvalues.csv");
  REQUIRE(eig.size() == 1);
  CHECK(eig[0][0] == Catch::Approx(0.5).margin(1e-8));
}
