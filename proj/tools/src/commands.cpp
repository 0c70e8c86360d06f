#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include <koopid/analysis.hpp>
#include <koopid/archive.hpp>
#include <koopid/error.hpp>
#include <koopid/random.hpp>
#include <koopid/series_csv.hpp>

namespace koopid::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

const fs::path& require_path(const std::optional<fs::path>& p, const char* flag) {
  if (!p) throw FormatError(std::string("missing required option ") + flag);
  return *p;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

Vector input_channel(const RunConfig& c, double dt, const std::string& stream) {
  const InputSection& in = c.input;
  InputSignalSpec spec;
  spec.duration = c.system.duration;
  switch (in.kind) {
    case InputKind::None: return Vector::Zero(sample_count(c.system.duration, dt));
    case InputKind::Constant:
      spec.hold = in.hold;
      spec.constant = in.value;
      if (spec.duration < 2.0 * spec.hold) spec.hold = spec.duration / 2.0;
      break;
    case InputKind::Random:
      spec.lo = in.lo;
      spec.hi = in.hi;
      spec.hold = in.hold;
      spec.seed = substream_seed(c.seed, stream);
      break;
  }
  try {
    return gen_input(spec, dt);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("config: [input] ") + e.what());
  }
}

Eigen::Vector2d planar_x0(const RunConfig& c, Eigen::Vector2d fallback) {
  const auto& x0 = c.system.x0;
  if (x0.empty()) return fallback;
  if (x0.size() != 2) throw FormatError("config: [system] x0 needs two values");
  return {x0[0], x0[1]};
}

json series_manifest(const RunConfig& c, const ObservableSeries& s) {
  json j;
  j["seed"] = c.seed;
  j["system"] = {{"kind", to_string(c.system.kind)}, {"duration", c.system.duration}};
  switch (c.system.kind) {
    case SystemKind::Duffing: {
      const auto& p = c.system.duffing;
      j["system"].update({{"alpha", p.alpha}, {"beta", p.beta}, {"delta", p.delta},
                          {"dt", p.dt_sample}, {"substeps", p.substeps}});
      break;
    }
    case SystemKind::Burgers: {
      const auto& p = c.system.burgers;
      j["system"].update({{"reynolds", p.reynolds}, {"grid_points", p.grid_points}, {"dt", p.dt_sample},
                          {"observable", c.system.burgers_observable == BurgersObservable::Stations
                                             ? "stations" : "grid"}});
      break;
    }
    case SystemKind::Hopf: {
      const auto& p = c.system.hopf;
      j["system"].update({{"mu", p.mu}, {"omega", p.omega}, {"input_scale", p.input_scale},
                          {"dt", p.dt_sample}, {"substeps", p.substeps},
                          {"observable", c.system.hopf_observable == HopfObservable::XY ? "xy" : "x"}});
      break;
    }
    case SystemKind::ExternalCsv: break;
  }
  const char* kinds[] = {"random", "constant", "none"};
  j["input"] = {{"kind", kinds[static_cast<int>(c.input.kind)]}, {"lo", c.input.lo}, {"hi", c.input.hi},
                {"hold", c.input.hold}, {"value", c.input.value}};
  j["samples"] = s.samples();
  j["dt"] = s.dt();
  j["observables"] = s.observables();
  j["inputs"] = s.inputs();
  return j;
}

SimulationResult run_simulation(const RunConfig& c) {
  const double duration = c.system.duration;
  const bool with_inputs = c.input.kind != InputKind::None;
  switch (c.system.kind) {
    case SystemKind::Duffing: {
      const DuffingParams& p = c.system.duffing;
      const Vector u = input_channel(c, p.dt_sample, "input");
      SimulationResult r = simulate_duffing(p, planar_x0(c, {0.0, 0.0}), u, duration);
      if (!with_inputs) r.series = ObservableSeries(r.series.Y(), std::nullopt, r.series.dt());
      return r;
    }
    case SystemKind::Hopf: {
      const HopfParams& p = c.system.hopf;
      const Vector u = input_channel(c, p.dt_sample, "input");
      SimulationResult r = simulate_hopf(p, planar_x0(c, {1.0, 0.0}), u, duration, c.system.hopf_observable);
      if (!with_inputs) r.series = ObservableSeries(r.series.Y(), std::nullopt, r.series.dt());
      return r;
    }
    case SystemKind::Burgers: {
      BurgersParams p = c.system.burgers;
      const Vector wl = input_channel(c, p.dt_sample, "input.wL");
      const Vector wr = input_channel(c, p.dt_sample, "input.wR");
      Matrix boundary(2, wl.size());
      boundary.row(0) = wl.transpose();
      boundary.row(1) = wr.transpose();
      Vector w0(p.grid_points);
      const auto& x0 = c.system.x0;
      if (x0.empty()) {
        for (int j = 0; j < p.grid_points; ++j) {
          const double x = static_cast<double>(j) / (p.grid_points - 1);
          w0(j) = (1.0 - x) * wl(0) + x * wr(0);
        }
      } else if (x0.size() == 1) {
        w0.setConstant(x0[0]);
      } else if (static_cast<int>(x0.size()) == p.grid_points) {
        w0 = Eigen::Map<const Vector>(x0.data(), p.grid_points);
      } else {
        throw FormatError("config: [system] x0 needs 1 or grid_points values for burgers");
      }
      if (!c.system.substeps) {
        const double w_max = std::max(w0.cwiseAbs().maxCoeff(), boundary.cwiseAbs().maxCoeff());
        p.substeps = std::max(p.substeps, burgers_stable_substeps(p, w_max));
      }
      SimulationResult r = simulate_burgers(p, w0, boundary, duration, c.system.burgers_observable);
      if (!with_inputs) r.series = ObservableSeries(r.series.Y(), std::nullopt, r.series.dt());
      return r;
    }
    case SystemKind::ExternalCsv: break;
  }
  throw FormatError("simulate: system 'external-csv' has nothing to simulate");
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

// Dims table, one "name value" row per line.
void print_dims(std::ostream& log, const KoopmanModel& model, Index snapshots, Index rank) {
  const Dictionary& d = model.dictionary();
  log << "family     " << to_string(model.tag()) << '\n'
      << "m          " << d.observables() << '\n'
      << "q          " << d.inputs() << '\n'
      << "z          " << d.delay() << '\n'
      << "b          " << d.pre_lift_dim() << '\n'
      << "L          " << d.lift_dim() << '\n'
      << "M          " << d.state_dim() << '\n'
      << "state      " << model.state_dim() << '\n'
      << "snapshots  " << snapshots << '\n'
      << "rank       " << rank << '\n';
}

ObservableSeries load_series(const CommandPaths& paths) {
  return read_series_csv(require_path(paths.data, "--data"));
}

void check_series_matches(const KoopmanModel& model, const ObservableSeries& s) {
  const DictionarySpec& spec = model.spec();
  if (s.observables() != spec.m) {
    throw FormatError("dataset has " + std::to_string(s.observables()) + " observables, model expects " +
                      std::to_string(spec.m));
  }
  if (model.is_controlled() && s.inputs() != spec.q) {
    throw FormatError("dataset has " + std::to_string(s.inputs()) + " inputs, model expects " +
                      std::to_string(spec.q));
  }
}

LiftedData model_training_view(const KoopmanModel& model, const ObservableSeries& s) {
  LiftedData data = assemble(s, model.spec());
  return model.layout() == StateLayout::DelayWithLift ? augment_with_lift(data) : data;
}

// Initial model state for cycle/prc: recorded history when a dataset is
// given, else a constant observable history at init_value.
Vector analysis_initial_state(const KoopmanModel& model, const RunConfig& c, const CommandPaths& paths) {
  const Index z = model.dictionary().delay();
  if (paths.data) {
    const ObservableSeries s = load_series(paths);
    check_series_matches(model, s);
    const Index start = c.analysis.start.value_or(z);
    if (start < z || start >= s.samples()) throw FormatError("analysis: start index out of range");
    std::optional<Matrix> inputs;
    if (model.dictionary().controlled() && s.has_inputs()) inputs = s.U()->middleCols(start - z, z);
    return delay_init(model, s.Y().middleCols(start - z, z + 1), inputs);
  }
  const Matrix history = Matrix::Constant(model.spec().m, z + 1, c.analysis.init_value);
  return delay_init(model, history, std::nullopt);
}

CycleResult analysis_cycle(const KoopmanModel& model, const RunConfig& c, const CommandPaths& paths) {
  CycleOptions o;
  o.observable = c.analysis.observable;
  o.threshold = c.analysis.threshold;
  o.transient = c.analysis.transient;
  o.max_steps = c.analysis.max_steps;
  return find_limit_cycle(model, analysis_initial_state(model, c, paths), o);
}

} // namespace

void cmd_simulate(const RunConfig& config, const CommandPaths& paths, std::ostream& log) {
  const SimulationResult r = run_simulation(config);
  ensure_dir(paths.out);
  write_series_csv(paths.out / "series.csv", r.series);
  write_json(paths.out / "series.json", series_manifest(config, r.series));
  log << "wrote " << r.series.samples() << " samples to " << (paths.out / "series.csv").string() << '\n';
}

void cmd_fit(const RunConfig& config, const CommandPaths& paths, std::ostream& log) {
  const ObservableSeries series = load_series(paths);
  const FamilyTag family = config.fit.family;
  const bool controlled = family == FamilyTag::LinearControlled || family == FamilyTag::NonlinearControlled;
  const bool linear = family == FamilyTag::Linear || family == FamilyTag::LinearControlled;
  if (controlled && !series.has_inputs()) {
    throw FormatError("fit: family " + to_string(family) + " needs input columns in the dataset");
  }
  if (config.fit.lifted_state && !linear) {
    throw FormatError("config: [fit] lifted_state applies to linear families only");
  }
  if (config.fit.pod_rho > 0 && linear) {
    throw FormatError("config: [fit] pod_rho applies to nonlinear families only");
  }

  const DictionarySpec spec = make_dictionary_spec(config, series.observables(), controlled ? series.inputs() : 0);
  LiftedData data = assemble(series, spec);
  if (config.fit.lifted_state) data = augment_with_lift(data);

  const KoopmanRegression regression(data, family);
  const KoopmanModel model = regression.fit(config.fit.rank);
  std::optional<ReducedModel> reduced;
  if (config.fit.pod_rho > 0) reduced = reduce(model, pod_basis(data.Gamma, config.fit.pod_rho));

  ensure_dir(paths.out);
  const fs::path archive = paths.out / "model.kpa";
  save_model(archive, model, reduced ? &*reduced : nullptr);

  print_dims(log, model, data.snapshots(), regression.solver().effective_rank(config.fit.rank));
  log << "residual   " << format_double(training_residual(model, data)) << '\n';
  if (reduced) {
    log << "pod_rho    " << reduced->basis().rho() << '\n'
        << "energy     " << format_double(reduced->basis().energy_fraction) << '\n';
  }
  for (const auto& w : model.warnings) log << "warning: " << w << '\n';
  log << "wrote " << archive.string() << '\n';
}

void cmd_predict(const RunConfig& config, const CommandPaths& paths, std::ostream& log) {
  const ModelBundle bundle = load_model(require_path(paths.model, "--model"));
  const KoopmanModel& model = bundle.model;
  const ObservableSeries series = load_series(paths);
  check_series_matches(model, series);

  const Index z = model.dictionary().delay();
  const Index m = model.spec().m;
  const Index start = config.predict.start.value_or(z);
  const Index steps = config.predict.steps;
  if (start < z) throw FormatError("predict: start " + std::to_string(start) + " leaves less than z=" +
                                   std::to_string(z) + " samples of history");
  if (start + steps >= series.samples()) {
    throw FormatError("predict: dataset has " + std::to_string(series.samples()) + " samples; start " +
                      std::to_string(start) + " + steps " + std::to_string(steps) + " exceeds it");
  }

  std::optional<Matrix> input_history, inputs;
  if (model.is_controlled()) {
    input_history = series.U()->middleCols(start - z, z);
    inputs = series.U()->middleCols(start, steps);
  }
  const Vector gamma0 = delay_init(model, series.Y().middleCols(start - z, z + 1), input_history);

  Trajectory traj;
  if (config.predict.reduced) {
    if (!bundle.reduced) throw FormatError("predict: archive has no reduced model");
    if (model.layout() != StateLayout::Delay) throw FormatError("predict: reduced model needs the delay layout");
    traj = rollout(*bundle.reduced, gamma0, inputs, steps);
  } else {
    traj = rollout(model, gamma0, inputs, steps);
  }

  const Index produced = traj.states.cols();
  const Matrix pred = traj.states.topRows(m);
  const Matrix truth = series.Y().middleCols(start, produced);
  const double dx = config.predict.dx.value_or(1.0 / static_cast<double>(m));
  const Vector err = l2_error(truth, pred, dx);

  Matrix table(produced, m + 1), errors(produced, 2);
  for (Index k = 0; k < produced; ++k) {
    const double t = static_cast<double>(start + k) * series.dt();
    table(k, 0) = t;
    table.row(k).tail(m) = pred.col(k).transpose();
    errors(k, 0) = t;
    errors(k, 1) = err(k);
  }
  std::vector<std::string> header{"t"};
  for (Index k = 0; k < m; ++k) header.push_back("y" + std::to_string(k + 1));

  ensure_dir(paths.out);
  write_table_csv(paths.out / "prediction.csv", header, table);
  write_table_csv(paths.out / "error.csv", {"t", "l2"}, errors);
  log << "mean_l2    " << format_double(err.mean()) << '\n'
      << "max_l2     " << format_double(err.maxCoeff()) << '\n';
  if (traj.diverged) {
    throw NumericalError("predict: rollout diverged at step " + std::to_string(*traj.divergence_step) +
                         "; partial outputs written");
  }
}

void cmd_analyze(const RunConfig& config, const CommandPaths& paths, std::ostream& log) {
  const ModelBundle bundle = load_model(require_path(paths.model, "--model"));
  const KoopmanModel& model = bundle.model;
  const AnalysisSection& a = config.analysis;
  ensure_dir(paths.out);

  if (a.task == "basins") {
    if (model.spec().m != 1) {
      throw FormatError("analyze basins: grid points (x1, x2) need a single-observable model; this one has m=" +
                        std::to_string(model.spec().m));
    }
    BasinGrid grid{a.x1_lo, a.x1_hi, a.x1_count, a.x2_lo, a.x2_hi, a.x2_count};
    BasinOptions o;
    o.u_const = a.u_const;
    o.horizon = a.horizon;
    o.settle_tol = a.settle_tol;
    o.settle_window = a.settle_window;
    o.observable = a.observable;
    o.threads = paths.threads;
    const BasinGridResult r = basin_map(model, grid, o);
    Matrix rows(grid.x1_count * grid.x2_count, 3);
    Index k = 0;
    Index settled = 0;
    for (Index i = 0; i < grid.x1_count; ++i) {
      for (Index j = 0; j < grid.x2_count; ++j, ++k) {
        rows.row(k) << grid.x1(i), grid.x2(j), r.values(i, j);
        settled += std::isnan(r.values(i, j)) ? 0 : 1;
      }
    }
    write_table_csv(paths.out / "basins.csv", {"x1", "x2", "label"}, rows);
    log << "cells      " << rows.rows() << '\n' << "settled    " << settled << '\n';
    return;
  }

  if (a.task == "cycle") {
    const CycleResult cyc = analysis_cycle(model, config, paths);
    Matrix summary(1, 4);
    summary << cyc.period, static_cast<double>(cyc.transient_steps), cyc.converged ? 1.0 : 0.0, cyc.amplitude;
    write_table_csv(paths.out / "cycle_summary.csv", {"period", "transient", "converged", "amplitude"}, summary);
    if (cyc.converged) {
      const Index m = model.spec().m;
      Matrix orbit(cyc.samples.cols(), m + 2);
      for (Index j = 0; j < cyc.samples.cols(); ++j) {
        orbit(j, 0) = static_cast<double>(cyc.start_step + j);
        orbit(j, 1) = cyc.phase_of(j);
        orbit.row(j).tail(m) = cyc.samples.col(j).head(m).transpose();
      }
      std::vector<std::string> header{"step", "phase"};
      for (Index k = 0; k < m; ++k) header.push_back("y" + std::to_string(k + 1));
      write_table_csv(paths.out / "cycle_orbit.csv", header, orbit);
    }
    log << "period     " << format_double(cyc.period) << '\n' << "converged  " << cyc.converged << '\n';
    return;
  }

  if (a.task == "prc") {
    if (!model.is_controlled()) throw FormatError("analyze prc: needs a controlled model (inputs drive the pulse)");
    const CycleResult cyc = analysis_cycle(model, config, paths);
    if (!cyc.converged) throw NumericalError("analyze prc: the model has no converged limit cycle");
    if (a.phases < 1) throw FormatError("config: [analysis] phases must be >= 1");
    std::vector<double> phases;
    for (Index k = 0; k < a.phases; ++k) {
      phases.push_back(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(a.phases));
    }
    PrcOptions o;
    o.magnitude = a.magnitude;
    o.duration = a.pulse_duration;
    o.settle_cycles = a.settle_cycles;
    o.threads = paths.threads;
    const auto prc = estimate_prc(model, cyc, phases, o);
    Matrix rows(static_cast<Index>(prc.size()), 2);
    for (std::size_t k = 0; k < prc.size(); ++k) rows.row(static_cast<Index>(k)) << prc[k].phase, prc[k].z;
    write_table_csv(paths.out / "prc.csv", {"phase", "z"}, rows);
    log << "period     " << format_double(cyc.period) << '\n' << "phases     " << prc.size() << '\n';
    return;
  }

  if (a.task == "fixed-point") {
    Vector guess;
    const Index n = model.state_dim();
    if (a.guess.empty()) {
      guess = delay_init(model, Matrix::Constant(model.spec().m, model.dictionary().delay() + 1, a.init_value));
    } else if (static_cast<Index>(a.guess.size()) == n) {
      guess = Eigen::Map<const Vector>(a.guess.data(), n);
    } else if (a.guess.size() == 1) {
      guess = delay_init(model, Matrix::Constant(model.spec().m, model.dictionary().delay() + 1, a.guess[0]));
    } else {
      throw FormatError("config: [analysis] guess needs 1 or " + std::to_string(n) + " values");
    }
    const FixedPointResult fp = find_fixed_point(model, a.u_const, guess, a.tol);
    Matrix state(n, 2), eig(static_cast<Index>(fp.eigenvalues.size()), 3);
    for (Index k = 0; k < n; ++k) state.row(k) << static_cast<double>(k), fp.state(k);
    for (std::size_t k = 0; k < fp.eigenvalues.size(); ++k) {
      const auto l = fp.eigenvalues[k];
      eig.row(static_cast<Index>(k)) << l.real(), l.imag(), std::abs(l);
    }
    write_table_csv(paths.out / "fixed_point.csv", {"index", "value"}, state);
    write_table_csv(paths.out / "fixed_point_eigenvalues.csv", {"re", "im", "modulus"}, eig);
    log << "iterations " << fp.iterations << '\n' << "residual   " << format_double(fp.residual) << '\n';
    return;
  }

  if (a.task == "spectrum") {
    if (!model.is_linear()) {
      throw FormatError("analyze spectrum: needs a linear (dmd/edmdc) model; this one is " + to_string(model.tag()));
    }
    const ObservableSeries s = load_series(paths);
    check_series_matches(model, s);
    const EigenmodeReport report = eigenmode_spectrum(model, model_training_view(model, s));
    Matrix rows(static_cast<Index>(report.modes.size()), 4);
    for (std::size_t k = 0; k < report.modes.size(); ++k) {
      const Eigenmode& e = report.modes[k];
      rows.row(static_cast<Index>(k)) << e.eigenvalue.real(), e.eigenvalue.imag(), e.frequency, e.mean_amplitude;
    }
    write_table_csv(paths.out / "spectrum.csv", {"re", "im", "frequency", "amplitude"}, rows);
    for (const auto& w : report.warnings) log << "warning: " << w << '\n';
    log << "modes      " << rows.rows() << '\n';
    return;
  }

  throw FormatError("config: [analysis] task must be basins, cycle, prc, fixed-point or spectrum (got '" +
                    a.task + "')");
}

int run_command(const std::string& name, const fs::path& config_path, std::optional<std::uint64_t> seed,
                const CommandPaths& paths, std::ostream& log, std::ostream& err) {
  try {
    RunConfig config = load_config(config_path);
    if (seed) config.seed = *seed;
    CommandPaths p = paths;
    if (p.out.empty()) p.out = config.output_dir;
    if (name == "simulate") {
      cmd_simulate(config, p, log);
    } else if (name == "fit") {
      cmd_fit(config, p, log);
    } else if (name == "predict") {
      cmd_predict(config, p, log);
    } else if (name == "analyze") {
      cmd_analyze(config, p, log);
    } else {
      err << "error: unknown command '" << name << "'\n";
      return kExitUsage;
    }
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

} // namespace koopid::cli
