#include "koopid/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "koopid/error.hpp"
#include "koopid/random.hpp"

namespace koopid {
namespace {

/// Classical RK4 over one sample interval split into `substeps` steps; the
/// right-hand side sees the input held constant.
template <typename Rhs>
void integrate_sample(Vector& x, double dt_sample, int substeps, const Rhs& rhs) {
  const Index n = x.size();
  Vector k1(n), k2(n), k3(n), k4(n), tmp(n);
  const double h = dt_sample / substeps;
  for (int s = 0; s < substeps; ++s) {
    rhs(x, k1);
    tmp = x + 0.5 * h * k1;
    rhs(tmp, k2);
    tmp = x + 0.5 * h * k2;
    rhs(tmp, k3);
    tmp = x + h * k3;
    rhs(tmp, k4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
}

void check_sampling(double dt_sample, int substeps) {
  if (!(dt_sample > 0.0)) throw std::invalid_argument("simulator: dt_sample must be positive");
  if (substeps < 1) throw std::invalid_argument("simulator: substeps must be >= 1");
}

void check_state(const Vector& x, Index sample) {
  if (!x.allFinite()) {
    throw NumericalError("simulator: non-finite state at sample " + std::to_string(sample));
  }
}

Index checked_samples(double duration, double dt, Index available, const char* what) {
  if (!(duration > 0.0)) throw std::invalid_argument("simulator: duration must be positive");
  const Index n = sample_count(duration, dt);
  if (available < n) {
    throw std::invalid_argument(std::string("simulator: ") + what + " has " +
                                std::to_string(available) + " samples, " + std::to_string(n) +
                                " needed to cover the duration");
  }
  return n;
}

// Duffing

void duffing_rhs(const DuffingParams& p, double u, const Vector& x, Vector& dx) {
  dx(0) = x(1);
  dx(1) = u - p.delta * x(1) - p.alpha * x(0) - p.beta * x(0) * x(0) * x(0);
}

// Burgers: central differences for both terms, boundary nodes pinned.

double burgers_dx(const BurgersParams& p) { return 1.0 / (p.grid_points - 1); }

void burgers_rhs(const BurgersParams& p, const Vector& w, Vector& dw) {
  const Index n = w.size();
  const double dx = burgers_dx(p);
  const double nu = 1.0 / p.reynolds;
  const double inv_dx2 = 1.0 / (dx * dx);
  const double inv_2dx = 0.5 / dx;
  dw(0) = 0.0;
  dw(n - 1) = 0.0;
  for (Index j = 1; j + 1 < n; ++j) {
    dw(j) = nu * (w(j + 1) - 2.0 * w(j) + w(j - 1)) * inv_dx2 - w(j) * (w(j + 1) - w(j - 1)) * inv_2dx;
  }
}

void check_burgers(const BurgersParams& p) {
  check_sampling(p.dt_sample, p.substeps);
  if (!(p.reynolds > 0.0)) throw std::invalid_argument("burgers: Re must be positive");
  if (p.grid_points < 8) throw std::invalid_argument("burgers: need at least 8 grid points");
}

double burgers_stable_dt(const BurgersParams& p, double w_max) {
  const double dx = burgers_dx(p);
  double bound = dx * dx * p.reynolds / 2.0;
  if (w_max > 0.0) bound = std::min(bound, dx / w_max);
  return 0.5 * bound;
}

void burgers_step(const BurgersParams& p, Vector& w, double wl, double wr) {
  w(0) = wl;
  w(w.size() - 1) = wr;
  integrate_sample(w, p.dt_sample, p.substeps, [&](const Vector& s, Vector& d) { burgers_rhs(p, s, d); });
}

// Hopf

void hopf_rhs(const HopfParams& p, double u, const Vector& s, Vector& ds) {
  const double r2 = s(0) * s(0) + s(1) * s(1);
  ds(0) = p.mu * s(0) - p.omega * s(1) - s(0) * r2 + p.input_scale * u;
  ds(1) = p.omega * s(0) + p.mu * s(1) - s(1) * r2;
}

} // namespace

Index sample_count(double duration, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("sample_count: dt must be positive");
  return static_cast<Index>(std::llround(duration / dt)) + 1;
}

// ---------------------------------------------------------------------------
// Inputs

NaturalCubicSpline::NaturalCubicSpline(std::vector<double> t, std::vector<double> y)
    : t_(std::move(t)), y_(std::move(y)) {
  const std::size_t n = t_.size();
  if (n < 2 || y_.size() != n) throw std::invalid_argument("spline: need >= 2 matching knots");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("spline: knots must increase");
  }
  m_.assign(n, 0.0);
  if (n == 2) return;
  // Tridiagonal system for interior second derivatives (Thomas algorithm).
  const std::size_t k = n - 2;
  std::vector<double> diag(k), upper(k), rhs(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double h0 = t_[i + 1] - t_[i];
    const double h1 = t_[i + 2] - t_[i + 1];
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((y_[i + 2] - y_[i + 1]) / h1 - (y_[i + 1] - y_[i]) / h0);
  }
  for (std::size_t i = 1; i < k; ++i) {
    const double lower = t_[i + 1] - t_[i];
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> sol(k);
  sol[k - 1] = rhs[k - 1] / diag[k - 1];
  for (std::size_t i = k - 1; i-- > 0;) sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
  for (std::size_t i = 0; i < k; ++i) m_[i + 1] = sol[i];
}

double NaturalCubicSpline::operator()(double t) const {
  const std::size_t n = t_.size();
  if (t <= t_.front()) {
    const double h = t_[1] - t_[0];
    const double slope = (y_[1] - y_[0]) / h - h * (2.0 * m_[0] + m_[1]) / 6.0;
    return y_[0] + slope * (t - t_[0]);
  }
  if (t >= t_.back()) {
    const double h = t_[n - 1] - t_[n - 2];
    const double slope = (y_[n - 1] - y_[n - 2]) / h + h * (m_[n - 2] + 2.0 * m_[n - 1]) / 6.0;
    return y_[n - 1] + slope * (t - t_[n - 1]);
  }
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
  const double h = t_[i + 1] - t_[i];
  const double a = (t_[i + 1] - t) / h;
  const double b = (t - t_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

namespace {

void check_input_spec(const InputSignalSpec& spec) {
  if (!(spec.hold > 0.0)) throw std::invalid_argument("gen_input: hold must be positive");
  if (!spec.constant && !(spec.lo < spec.hi)) throw std::invalid_argument("gen_input: need lo < hi");
  if (!(spec.duration >= 2.0 * spec.hold)) {
    throw std::invalid_argument("gen_input: duration must cover at least two hold segments");
  }
}

} // namespace

std::vector<double> input_knot_times(const InputSignalSpec& spec) {
  check_input_spec(spec);
  const auto segments = static_cast<std::size_t>(std::ceil(spec.duration / spec.hold - 1e-9));
  std::vector<double> t(segments);
  for (std::size_t k = 0; k < segments; ++k) t[k] = (static_cast<double>(k) + 0.5) * spec.hold;
  return t;
}

std::vector<double> input_knot_values(const InputSignalSpec& spec) {
  const std::size_t segments = input_knot_times(spec).size();
  std::vector<double> y(segments);
  if (spec.constant) {
    std::fill(y.begin(), y.end(), *spec.constant);
    return y;
  }
  RandomStream rng(spec.seed);
  for (auto& v : y) v = rng.uniform(spec.lo, spec.hi);
  return y;
}

Vector gen_input(const InputSignalSpec& spec, double dt) {
  const NaturalCubicSpline spline(input_knot_times(spec), input_knot_values(spec));
  const Index n = sample_count(spec.duration, dt);
  if (spec.constant) return Vector::Constant(n, *spec.constant);  // exact, no spline roundoff
  Vector out(n);
  for (Index i = 0; i < n; ++i) out(i) = spline(static_cast<double>(i) * dt);
  return out;
}

// ---------------------------------------------------------------------------
// Duffing

SimulationResult simulate_duffing(const DuffingParams& p, const Eigen::Vector2d& x0,
                                  const Vector& input, double duration) {
  check_sampling(p.dt_sample, p.substeps);
  const Index n = checked_samples(duration, p.dt_sample, input.size(), "input");
  Matrix state(2, n);
  Vector x = x0;
  check_state(x, 0);
  state.col(0) = x;
  for (Index i = 0; i + 1 < n; ++i) {
    const double u = input(i);
    integrate_sample(x, p.dt_sample, p.substeps, [&](const Vector& s, Vector& d) { duffing_rhs(p, u, s, d); });
    check_state(x, i + 1);
    state.col(i + 1) = x;
  }
  Matrix u = input.head(n).transpose();
  return {ObservableSeries(state.topRows(1), std::move(u), p.dt_sample), state};
}

DuffingSystem::DuffingSystem(DuffingParams p) : p_(p) { check_sampling(p_.dt_sample, p_.substeps); }

Vector DuffingSystem::step(const Vector& state, const Vector& input) const {
  Vector x = state;
  const double u = input.size() > 0 ? input(0) : 0.0;
  integrate_sample(x, p_.dt_sample, p_.substeps, [&](const Vector& s, Vector& d) { duffing_rhs(p_, u, s, d); });
  return x;
}

// ---------------------------------------------------------------------------
// Burgers

int burgers_stable_substeps(const BurgersParams& p, double w_max) {
  BurgersParams q = p;
  q.substeps = 1;
  check_burgers(q);
  return std::max(1, static_cast<int>(std::ceil(p.dt_sample / burgers_stable_dt(p, w_max) - 1e-12)));
}

std::vector<Index> burgers_station_nodes(int grid_points) {
  std::vector<Index> nodes(20);
  for (int s = 0; s < 20; ++s) {
    nodes[static_cast<std::size_t>(s)] = static_cast<Index>(std::llround(0.05 * s * (grid_points - 1)));
  }
  return nodes;
}

SimulationResult simulate_burgers(const BurgersParams& p, const Vector& w0, const Matrix& boundary,
                                  double duration, BurgersObservable observable) {
  check_burgers(p);
  if (w0.size() != p.grid_points) throw std::invalid_argument("burgers: w0 length must equal grid_points");
  if (boundary.rows() != 2) throw std::invalid_argument("burgers: boundary inputs must be 2 x samples");
  const Index n = checked_samples(duration, p.dt_sample, boundary.cols(), "boundary input");
  require_finite(w0, "burgers initial state");
  require_finite(boundary, "burgers boundary input");

  const double w_max = std::max(w0.cwiseAbs().maxCoeff(), boundary.leftCols(n).cwiseAbs().maxCoeff());
  const double h = p.dt_sample / p.substeps;
  if (h > burgers_stable_dt(p, w_max)) {
    throw std::invalid_argument("burgers: substep " + std::to_string(h) +
                                " violates the stability bound " +
                                std::to_string(burgers_stable_dt(p, w_max)) + "; use at least " +
                                std::to_string(burgers_stable_substeps(p, w_max)) + " substeps");
  }

  Matrix state(p.grid_points, n);
  Vector w = w0;
  state.col(0) = w;
  for (Index i = 0; i + 1 < n; ++i) {
    burgers_step(p, w, boundary(0, i), boundary(1, i));
    check_state(w, i + 1);
    state.col(i + 1) = w;
  }

  Matrix y;
  if (observable == BurgersObservable::Stations) {
    const auto nodes = burgers_station_nodes(p.grid_points);
    y.resize(20, n);
    for (int s = 0; s < 20; ++s) y.row(s) = state.row(nodes[static_cast<std::size_t>(s)]);
  } else {
    y = state;
  }
  return {ObservableSeries(std::move(y), boundary.leftCols(n), p.dt_sample), state};
}

BurgersSystem::BurgersSystem(BurgersParams p) : p_(p) { check_burgers(p_); }

Vector BurgersSystem::step(const Vector& state, const Vector& input) const {
  Vector w = state;
  burgers_step(p_, w, input(0), input(1));
  return w;
}

// ---------------------------------------------------------------------------
// Hopf

SimulationResult simulate_hopf(const HopfParams& p, const Eigen::Vector2d& x0, const Vector& input,
                               double duration, HopfObservable observable) {
  check_sampling(p.dt_sample, p.substeps);
  const Index n = checked_samples(duration, p.dt_sample, input.size(), "input");
  Matrix state(2, n);
  Vector x = x0;
  check_state(x, 0);
  state.col(0) = x;
  for (Index i = 0; i + 1 < n; ++i) {
    const double u = input(i);
    integrate_sample(x, p.dt_sample, p.substeps, [&](const Vector& s, Vector& d) { hopf_rhs(p, u, s, d); });
    check_state(x, i + 1);
    state.col(i + 1) = x;
  }
  Matrix u = input.head(n).transpose();
  const Index m = observable == HopfObservable::XY ? 2 : 1;
  return {ObservableSeries(state.topRows(m), std::move(u), p.dt_sample), state};
}

HopfSystem::HopfSystem(HopfParams p) : p_(p) { check_sampling(p_.dt_sample, p_.substeps); }

Vector HopfSystem::step(const Vector& state, const Vector& input) const {
  Vector x = state;
  const double u = input.size() > 0 ? input(0) : 0.0;
  integrate_sample(x, p_.dt_sample, p_.substeps, [&](const Vector& s, Vector& d) { hopf_rhs(p_, u, s, d); });
  return x;
}

} // namespace koopid
