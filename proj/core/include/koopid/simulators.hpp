#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "koopid/numerics.hpp"
#include "koopid/series.hpp"
#include "koopid/system.hpp"

namespace koopid {

// All simulators integrate with fixed-step classical RK4 and hold the input
// sample u_i constant over [t_i, t_{i+1}), so sampled data obey an exact
// map x_{i+1} = F(x_i, u_i).

struct SimulationResult {
  ObservableSeries series;  // observables (and inputs) at the sample instants
  Matrix state;             // full state at the sample instants, for validation
};

// ---------------------------------------------------------------------------
// Smoothed random input

struct InputSignalSpec {
  double lo = -1.0;
  double hi = 1.0;
  double hold = 1.0;      // time units per constant segment
  double duration = 10.0;
  std::uint64_t seed = 0;
  /// When set, every knot takes this value (a constant signal).
  std::optional<double> constant;
};

/// Natural cubic spline through (t_k, y_k), t strictly increasing; linear
/// extrapolation outside the knot range.
class NaturalCubicSpline {
public:
  NaturalCubicSpline(std::vector<double> t, std::vector<double> y);
  double operator()(double t) const;

private:
  std::vector<double> t_;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at the knots
};

/// Knot times of gen_input: segment midpoints (k + 1/2)·hold.
std::vector<double> input_knot_times(const InputSignalSpec& spec);
/// Knot values of gen_input (uniform on [lo, hi], one per segment).
std::vector<double> input_knot_values(const InputSignalSpec& spec);

/// Samples at t = i·dt for i = 0..round(duration/dt).
Vector gen_input(const InputSignalSpec& spec, double dt);

// ---------------------------------------------------------------------------
// Forced Duffing oscillator: x1' = x2, x2' = u - δ x2 - α x1 - β x1³

// Defaults give the double well: unstable origin, stable x1 = ±1.
struct DuffingParams {
  double alpha = -1.0;
  double beta = 1.0;
  double delta = 0.5;
  double dt_sample = 0.1;
  int substeps = 10;
};

/// Observable g(x) = x1. `input` holds one sample per output sample.
SimulationResult simulate_duffing(const DuffingParams& p, const Eigen::Vector2d& x0,
                                  const Vector& input, double duration);

class DuffingSystem : public DiscreteSystem {
public:
  explicit DuffingSystem(DuffingParams p);
  Index state_dim() const override { return 2; }
  Index input_dim() const override { return 1; }
  double dt() const override { return p_.dt_sample; }
  Vector step(const Vector& state, const Vector& input) const override;

private:
  DuffingParams p_;
};

// ---------------------------------------------------------------------------
// Viscous Burgers on [0, 1] with Dirichlet boundary inputs w(0)=wL, w(1)=wR

struct BurgersParams {
  double reynolds = 50.0;
  int grid_points = 64;  // including both boundary nodes
  double dt_sample = 0.1;
  int substeps = 40;
};

enum class BurgersObservable {
  Stations,  // 20 stations x = 0, 0.05, ..., 0.95 (nearest grid node)
  AllGrid,
};

/// Smallest substep count satisfying the stability bound for |w| <= w_max.
int burgers_stable_substeps(const BurgersParams& p, double w_max);

/// Grid node nearest to each of the 20 measurement stations.
std::vector<Index> burgers_station_nodes(int grid_points);

/// Inputs u = [wL; wR] (2 × samples). Throws when the substep violates
/// dt_sub <= 0.5 · min(dx²·Re/2, dx/max|w|).
SimulationResult simulate_burgers(const BurgersParams& p, const Vector& w0, const Matrix& boundary,
                                  double duration,
                                  BurgersObservable observable = BurgersObservable::Stations);

class BurgersSystem : public DiscreteSystem {
public:
  explicit BurgersSystem(BurgersParams p);
  Index state_dim() const override { return p_.grid_points; }
  Index input_dim() const override { return 2; }
  double dt() const override { return p_.dt_sample; }
  Vector step(const Vector& state, const Vector& input) const override;

private:
  BurgersParams p_;
};

// ---------------------------------------------------------------------------
// Hopf normal form:  x' = μx - ωy - x(x²+y²) + s·u,  y' = ωx + μy - y(x²+y²)

struct HopfParams {
  double mu = 1.0;
  double omega = 2.0 * std::numbers::pi / 5.0;
  double input_scale = 1.0;
  double dt_sample = 0.05;
  int substeps = 5;
};

enum class HopfObservable {
  X,   // g = x
  XY,  // g = (x, y)
};

SimulationResult simulate_hopf(const HopfParams& p, const Eigen::Vector2d& x0, const Vector& input,
                               double duration, HopfObservable observable = HopfObservable::X);

class HopfSystem : public DiscreteSystem {
public:
  explicit HopfSystem(HopfParams p);
  Index state_dim() const override { return 2; }
  Index input_dim() const override { return 1; }
  double dt() const override { return p_.dt_sample; }
  Vector step(const Vector& state, const Vector& input) const override;

private:
  HopfParams p_;
};

/// Number of samples covering [0, duration] at spacing dt.
Index sample_count(double duration, double dt);

} // namespace koopid
