#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <koopid/dictionary.hpp>
#include <koopid/estimators.hpp>
#include <koopid/simulators.hpp>

namespace koopid::cli {

// INI run configuration. Top-level `seed`, then the sections below; any key
// not listed here is rejected.
//
//   [system]     kind = duffing | burgers | hopf | external-csv
//                duration, dt, substeps, x0 (comma list)
//                alpha, beta, delta               (duffing)
//                reynolds, grid_points, observable = stations | grid  (burgers)
//                mu, omega, input_scale, observable = x | xy          (hopf)
//                path                             (external-csv)
//   [input]      kind = random | constant | none, lo, hi, hold, value
//   [dictionary] z, pre_lift, lift = none | polynomial | rbf | composed,
//                min_degree, max_degree, scope = latest | all,
//                rbf_count, rbf_lo, rbf_hi, pre_min_degree, pre_max_degree, pre_scope
//   [fit]        family = dmd | edmdc | nonlinear | nonlinear_controlled,
//                rank = full | <int>, pod_rho, lifted_state
//   [predict]    start, steps, dx, reduced
//   [analysis]   task = basins | cycle | prc | fixed-point | spectrum, plus task keys
//   [output]     directory

enum class SystemKind { Duffing, Burgers, Hopf, ExternalCsv };
enum class InputKind { Random, Constant, None };

struct SystemSection {
  SystemKind kind = SystemKind::Duffing;
  double duration = 1000.0;
  std::optional<double> dt;
  std::optional<int> substeps;
  std::vector<double> x0;
  DuffingParams duffing;
  BurgersParams burgers;
  BurgersObservable burgers_observable = BurgersObservable::Stations;
  HopfParams hopf;
  HopfObservable hopf_observable = HopfObservable::X;
  std::filesystem::path path;
};

struct InputSection {
  InputKind kind = InputKind::Random;
  double lo = -1.0;
  double hi = 1.0;
  double hold = 1.0;
  double value = 0.0;
};

struct LiftSection {
  std::string kind = "none";
  int min_degree = 2;
  int max_degree = 2;
  PolynomialScope scope = PolynomialScope::LatestFrame;
};

struct DictionarySection {
  Index z = 0;
  LiftSection pre_lift;
  LiftSection lift;
  Index rbf_count = 0;
  std::vector<double> rbf_lo;
  std::vector<double> rbf_hi;
};

struct FitSection {
  FamilyTag family = FamilyTag::NonlinearControlled;
  RankSpec rank = full_rank;
  Index pod_rho = 0;
  bool lifted_state = false;
};

struct PredictSection {
  std::optional<Index> start;
  Index steps = 100;
  std::optional<double> dx;
  bool reduced = false;
};

struct AnalysisSection {
  std::string task;
  // basins
  double x1_lo = -2.0, x1_hi = 2.0, x2_lo = -2.0, x2_hi = 2.0;
  Index x1_count = 41, x2_count = 41;
  double u_const = 0.0;
  Index horizon = 3000;
  double settle_tol = 1e-4;
  Index settle_window = 200;
  // cycle / prc
  Index observable = 0;
  double threshold = 0.0;
  Index transient = 2000;
  Index max_steps = 20000;
  double init_value = 0.1;
  std::optional<Index> start;
  double magnitude = 0.1;
  double pulse_duration = 0.1;
  Index phases = 16;
  Index settle_cycles = 20;
  // fixed-point
  std::vector<double> guess;
  double tol = 1e-10;
};

struct RunConfig {
  std::uint64_t seed = 0;
  SystemSection system;
  InputSection input;
  DictionarySection dictionary;
  FitSection fit;
  PredictSection predict;
  AnalysisSection analysis;
  std::filesystem::path output_dir = ".";
};

/// Parses INI text; `base` resolves relative paths. Throws FormatError.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base = ".");
RunConfig load_config(const std::filesystem::path& path);

std::string to_string(SystemKind kind);

/// Sample interval of the configured system.
double system_dt(const RunConfig& config);

/// Dictionary spec for a dataset with m observables and q inputs; RBF centers
/// are drawn from the "rbf_centers" substream of the config seed.
DictionarySpec make_dictionary_spec(const RunConfig& config, Index m, Index q);

} // namespace koopid::cli
