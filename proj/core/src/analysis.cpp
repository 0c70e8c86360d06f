#include "koopid/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "koopid/error.hpp"
#include "koopid/parallel.hpp"

namespace koopid {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

unsigned resolve_threads(unsigned requested) {
  return requested > 0 ? requested : default_thread_count();
}

double wrap_phase(double theta) {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

// Signed wrap into (-π, π].
double wrap_signed(double theta) {
  double w = wrap_phase(theta);
  if (w > std::numbers::pi) w -= kTwoPi;
  return w;
}

bool state_ok(const Vector& x) {
  return x.allFinite() && (x.size() == 0 || x.cwiseAbs().maxCoeff() <= kDivergenceBound);
}

double relative_spread(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

double basin_label(const DiscreteSystem& system, Vector x, const BasinOptions& opt) {
  const Vector u = Vector::Constant(system.input_dim(), opt.u_const);
  const Index window = opt.settle_window;
  const Index check_every = std::max<Index>(1, window / 4);
  std::vector<double> y;
  y.reserve(static_cast<std::size_t>(opt.horizon));
  for (Index s = 0; s < opt.horizon; ++s) {
    x = system.step(x, u);
    if (!state_ok(x)) return kNaN;
    y.push_back(system.observable(x, opt.observable));
    const Index n = static_cast<Index>(y.size());
    if (n >= window && (n % check_every == 0 || s + 1 == opt.horizon)) {
      const auto first = y.end() - window;
      const auto [lo, hi] = std::minmax_element(first, y.end());
      if (*hi - *lo < opt.settle_tol) return y.back();
    }
  }
  return kNaN;
}

} // namespace

// ---------------------------------------------------------------------------

Vector l2_error(const Matrix& truth, const Matrix& prediction, double dx) {
  if (truth.rows() != prediction.rows() || truth.cols() != prediction.cols()) {
    throw std::invalid_argument("l2_error: shape mismatch");
  }
  if (truth.rows() == 0) throw std::invalid_argument("l2_error: no stations");
  if (!(dx > 0.0)) throw std::invalid_argument("l2_error: dx must be positive");
  const Matrix sq = (truth - prediction).array().square().matrix();
  if (sq.rows() == 1) return dx * sq.row(0).transpose();
  Vector out = sq.colwise().sum().transpose();
  out -= 0.5 * (sq.row(0) + sq.row(sq.rows() - 1)).transpose();
  return dx * out;
}

std::vector<double> upward_crossings(const Eigen::Ref<const Vector>& y, double threshold) {
  std::vector<double> out;
  for (Index i = 0; i + 1 < y.size(); ++i) {
    if (y(i) < threshold && y(i + 1) >= threshold) {
      out.push_back(static_cast<double>(i) + (threshold - y(i)) / (y(i + 1) - y(i)));
    }
  }
  return out;
}

Vector observable_series(const DiscreteSystem& system, const Matrix& states, Index k) {
  Vector y(states.cols());
  for (Index i = 0; i < states.cols(); ++i) y(i) = system.observable(states.col(i), k);
  return y;
}

double spectral_radius(const std::vector<std::complex<double>>& eigenvalues) {
  double r = 0.0;
  for (const auto& l : eigenvalues) r = std::max(r, std::abs(l));
  return r;
}

double spectral_radius(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Basins

double BasinGrid::x1(Index i) const {
  return x1_count == 1 ? x1_lo : x1_lo + (x1_hi - x1_lo) * static_cast<double>(i) / (x1_count - 1);
}

double BasinGrid::x2(Index j) const {
  return x2_count == 1 ? x2_lo : x2_lo + (x2_hi - x2_lo) * static_cast<double>(j) / (x2_count - 1);
}

BasinGridResult basin_map(const DiscreteSystem& system, const PointInitializer& init,
                          const BasinGrid& grid, const BasinOptions& options) {
  if (grid.x1_count < 1 || grid.x2_count < 1) throw std::invalid_argument("basin_map: empty grid");
  if (!(grid.x1_lo <= grid.x1_hi) || !(grid.x2_lo <= grid.x2_hi)) {
    throw std::invalid_argument("basin_map: grid bounds out of order");
  }
  if (options.horizon < options.settle_window || options.settle_window < 2) {
    throw std::invalid_argument("basin_map: horizon must cover the settling window (>= 2 steps)");
  }
  if (!(options.settle_tol > 0.0)) throw std::invalid_argument("basin_map: settle_tol must be positive");

  BasinGridResult result{grid, Matrix(grid.x1_count, grid.x2_count), options.u_const};
  const auto cells = static_cast<std::size_t>(grid.x1_count * grid.x2_count);
  parallel_for(cells, resolve_threads(options.threads), [&](std::size_t c) {
    const Index i = static_cast<Index>(c) / grid.x2_count;
    const Index j = static_cast<Index>(c) % grid.x2_count;
    result.values(i, j) = basin_label(system, init(grid.x1(i), grid.x2(j)), options);
  });
  return result;
}

BasinGridResult basin_map(const KoopmanModel& model, const BasinGrid& grid,
                          const BasinOptions& options) {
  return basin_map(
      model, [&](double x1, double x2) { return delay_init_from_point(model, x1, x2); }, grid, options);
}

double basin_agreement(const BasinGridResult& a, const BasinGridResult& b, double tol) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) {
    throw std::invalid_argument("basin_agreement: grid shapes differ");
  }
  if (a.values.size() == 0) return 1.0;
  Index agree = 0;
  for (Index k = 0; k < a.values.size(); ++k) {
    const double x = a.values(k), y = b.values(k);
    if ((std::isnan(x) && std::isnan(y)) || std::abs(x - y) < tol) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(a.values.size());
}

// ---------------------------------------------------------------------------
// Limit cycles

double CycleResult::phase_of(Index j) const {
  return wrap_phase(start_phase + kTwoPi * static_cast<double>(j) * dt / period);
}

CycleResult find_limit_cycle(const DiscreteSystem& system, const Vector& x0,
                             const CycleOptions& options) {
  if (options.transient < 0 || options.max_steps <= options.transient) {
    throw std::invalid_argument("find_limit_cycle: max_steps must exceed transient");
  }
  if (options.cycles_to_check < 2) throw std::invalid_argument("find_limit_cycle: check at least 2 cycles");

  const Trajectory traj = iterate_constant(system, x0, 0.0, options.max_steps);
  if (traj.diverged) {
    throw NumericalError("find_limit_cycle: trajectory diverged at step " +
                         std::to_string(*traj.divergence_step));
  }
  const Vector y = observable_series(system, traj.states, options.observable);
  const Index n = y.size();

  CycleResult r;
  r.transient_steps = options.transient;
  r.observable = options.observable;
  r.threshold = options.threshold;
  r.dt = system.dt();

  if (upward_crossings(y, options.threshold).empty()) {
    throw NumericalError("find_limit_cycle: observable never crosses the threshold upwards");
  }
  std::vector<double> c = upward_crossings(y.tail(n - options.transient), options.threshold);
  for (double& t : c) t += static_cast<double>(options.transient);
  if (c.size() < 2) return r;  // oscillation died out

  std::vector<double> intervals, amplitudes;
  for (std::size_t k = 0; k + 1 < c.size(); ++k) {
    intervals.push_back(c[k + 1] - c[k]);
    const auto lo = static_cast<Index>(std::floor(c[k]));
    const auto hi = static_cast<Index>(std::ceil(c[k + 1]));
    const auto seg = y.segment(lo, hi - lo + 1);
    amplitudes.push_back(seg.maxCoeff() - seg.minCoeff());
  }

  const std::size_t need = static_cast<std::size_t>(options.cycles_to_check);
  const std::size_t used = std::min(need, intervals.size());
  const std::size_t first = intervals.size() - used;
  double mean = 0.0;
  for (std::size_t k = first; k < intervals.size(); ++k) mean += intervals[k];
  mean /= static_cast<double>(used);
  r.period = mean * r.dt;
  r.amplitude = amplitudes.back();

  bool ok = intervals.size() >= need;
  for (std::size_t k = first; ok && k + 1 < intervals.size(); ++k) {
    ok = relative_spread(intervals[k], intervals[k + 1]) <= options.rel_tol &&
         relative_spread(amplitudes[k], amplitudes[k + 1]) <= options.rel_tol;
  }
  // Crossings must continue to the end of the run.
  ok = ok && static_cast<double>(n - 1) - c.back() < 1.5 * mean;
  if (!ok) return r;

  const Index samples = std::max<Index>(1, static_cast<Index>(std::llround(mean)));
  const double anchor = c[first];
  const auto start = static_cast<Index>(std::ceil(anchor));
  if (start + samples > n) return r;
  r.samples = traj.states.middleCols(start, samples);
  r.start_step = start;
  r.start_phase = wrap_phase(kTwoPi * (static_cast<double>(start) - anchor) / mean);
  r.converged = true;
  return r;
}

// ---------------------------------------------------------------------------
// Fixed points

FixedPointResult find_fixed_point(const KoopmanModel& model, double u_const, const Vector& guess,
                                  double tol) {
  if (guess.size() != model.state_dim()) {
    throw std::invalid_argument("find_fixed_point: guess has length " + std::to_string(guess.size()) +
                                ", model state has " + std::to_string(model.state_dim()));
  }
  if (!(tol > 0.0)) throw std::invalid_argument("find_fixed_point: tol must be positive");
  constexpr Index kMaxIterations = 50;

  const Vector u = Vector::Constant(model.input_dim(), u_const);
  const Index dim = model.state_dim();
  Vector x = guess;
  FixedPointResult out;
  for (Index it = 0; it <= kMaxIterations; ++it) {
    const Vector r = model.step(x, u) - x;
    if (!r.allFinite()) throw NumericalError("find_fixed_point: non-finite residual");
    out.residual = r.norm();
    out.iterations = it;
    if (out.residual <= tol) {
      out.state = x;
      Eigen::EigenSolver<Matrix> es(model.jacobian(x), false);
      for (Index k = 0; k < es.eigenvalues().size(); ++k) out.eigenvalues.push_back(es.eigenvalues()(k));
      return out;
    }
    if (it == kMaxIterations) break;
    const Matrix j = model.jacobian(x) - Matrix::Identity(dim, dim);
    x -= j.colPivHouseholderQr().solve(r);
  }
  throw NumericalError("find_fixed_point: Newton did not converge in 50 iterations (residual " +
                       std::to_string(out.residual) + ")");
}

// ---------------------------------------------------------------------------
// Phase response

std::vector<PrcPoint> estimate_prc(const DiscreteSystem& system, const CycleResult& cycle,
                                   const std::vector<double>& phases, const PrcOptions& options) {
  if (!cycle.converged || cycle.samples.cols() == 0) {
    throw std::invalid_argument("estimate_prc: needs a converged cycle");
  }
  if (options.magnitude == 0.0) throw std::invalid_argument("estimate_prc: pulse magnitude is zero");
  if (!(options.duration > 0.0)) throw std::invalid_argument("estimate_prc: pulse duration must be positive");
  if (system.input_dim() < 1) throw std::invalid_argument("estimate_prc: system takes no input");
  if (options.settle_cycles < 1) throw std::invalid_argument("estimate_prc: settle_cycles must be >= 1");

  const double dt = system.dt();
  const double period_steps = cycle.period / dt;
  const Index pulse = std::max<Index>(1, static_cast<Index>(std::llround(options.duration / dt)));
  const double pulse_len = static_cast<double>(pulse) * dt;
  const double settle_at = static_cast<double>(options.settle_cycles) * period_steps;
  const Index steps = pulse + static_cast<Index>(std::ceil(settle_at + 3.0 * period_steps));

  Matrix pulse_input = Matrix::Zero(system.input_dim(), steps);
  pulse_input.row(0).head(pulse).setConstant(options.magnitude);

  std::vector<PrcPoint> out(phases.size());
  parallel_for(phases.size(), resolve_threads(options.threads), [&](std::size_t p) {
    const double target = wrap_phase(phases[p]);
    Index best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < cycle.samples.cols(); ++j) {
      const double d = std::abs(wrap_signed(cycle.phase_of(j) - target));
      if (d < best_dist) best_dist = d, best = j;
    }
    const Vector x0 = cycle.samples.col(best);

    const Trajectory ref = iterate_constant(system, x0, 0.0, steps);
    const Trajectory pert = iterate(system, x0, pulse_input, steps);
    if (ref.diverged || pert.diverged) throw NumericalError("estimate_prc: rollout diverged");
    const auto cr = upward_crossings(observable_series(system, ref.states, cycle.observable), cycle.threshold);
    const auto cp = upward_crossings(observable_series(system, pert.states, cycle.observable), cycle.threshold);

    const auto it = std::lower_bound(cp.begin(), cp.end(), settle_at);
    if (it == cp.end() || it + 1 == cp.end() || cr.empty()) {
      throw NumericalError("estimate_prc: no crossings after relaxation");
    }
    if (relative_spread(*(it + 1) - *it, period_steps) > 0.01) {
      throw NumericalError("estimate_prc: perturbed orbit did not relax back to the cycle");
    }
    const double tp = *it;
    double tr = cr.front();
    for (double t : cr) {
      if (std::abs(t - tp) < std::abs(tr - tp)) tr = t;
    }
    const double dtheta = wrap_signed(kTwoPi * (tr - tp) / period_steps);
    out[p] = {cycle.phase_of(best), dtheta / (options.magnitude * pulse_len)};
  });
  return out;
}

// ---------------------------------------------------------------------------
// Eigenmodes

EigenmodeReport eigenmode_spectrum(const KoopmanModel& model, const LiftedData& data) {
  if (!model.is_linear()) throw std::invalid_argument("eigenmode_spectrum: needs a linear model");
  const Matrix& a = model.A();
  if (data.Gamma.rows() != a.cols()) {
    throw std::invalid_argument("eigenmode_spectrum: snapshot length " + std::to_string(data.Gamma.rows()) +
                                " does not match the model state " + std::to_string(a.cols()));
  }
  EigenmodeReport report;
  Eigen::EigenSolver<Matrix> es(a, true);
  if (es.info() != Eigen::Success) throw NumericalError("eigenmode_spectrum: eigensolver failed");
  const Eigen::MatrixXcd v = es.eigenvectors();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(v);
  if (lu.rcond() < 1e-12) {
    report.warnings.push_back("state matrix is numerically defective (eigenvector rcond " +
                              std::to_string(lu.rcond()) + "); amplitudes are unreliable");
  }
  const Eigen::MatrixXcd w = lu.inverse();
  const Eigen::MatrixXcd proj = w * data.Gamma.cast<std::complex<double>>();
  const double d = static_cast<double>(std::max<Index>(1, proj.cols()));
  for (Index k = 0; k < a.rows(); ++k) {
    const std::complex<double> lambda = es.eigenvalues()(k);
    Eigenmode mode;
    mode.eigenvalue = lambda;
    mode.frequency = std::arg(lambda) / (kTwoPi * model.dt());
    mode.mean_amplitude = proj.row(k).cwiseAbs().sum() / d;
    report.modes.push_back(mode);
  }
  std::stable_sort(report.modes.begin(), report.modes.end(),
                   [](const Eigenmode& x, const Eigenmode& y) { return x.mean_amplitude > y.mean_amplitude; });
  return report;
}

} // namespace koopid
