#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "koopid/dictionary.hpp"
#include "koopid/estimators.hpp"
#include "koopid/numerics.hpp"
#include "koopid/system.hpp"

namespace koopid {

// Every routine here takes a DiscreteSystem, so a fitted model and the
// reference simulator it approximates go through identical code.

/// Per-step squared-difference integral over a uniform station grid
/// (trapezoid rule, spacing dx). Rows are stations, columns are time steps.
/// A single station counts as one cell of width dx.
Vector l2_error(const Matrix& truth, const Matrix& prediction, double dx);

/// Upward crossings of `threshold` by y, as fractional sample indices
/// (linear interpolation between samples).
std::vector<double> upward_crossings(const Eigen::Ref<const Vector>& y, double threshold);

/// Observable k of every column of a trajectory.
Vector observable_series(const DiscreteSystem& system, const Matrix& states, Index k);

double spectral_radius(const std::vector<std::complex<double>>& eigenvalues);
double spectral_radius(const Matrix& a);

// ---------------------------------------------------------------------------
// Basins of attraction

struct BasinGrid {
  double x1_lo = -2.0, x1_hi = 2.0;
  Index x1_count = 41;
  double x2_lo = -2.0, x2_hi = 2.0;
  Index x2_count = 41;

  double x1(Index i) const;
  double x2(Index j) const;
};

struct BasinOptions {
  double u_const = 0.0;
  Index horizon = 3000;  // steps
  double settle_tol = 1e-4;
  Index settle_window = 200;
  Index observable = 0;
  unsigned threads = 0;  // 0: default_thread_count()
};

struct BasinGridResult {
  BasinGrid grid;
  Matrix values;  // x1_count × x2_count; NaN = diverged or not settled
  double u_const = 0.0;
};

/// Maps a grid point (x1, x2) to an initial state of the system.
using PointInitializer = std::function<Vector(double x1, double x2)>;

/// Rolls every grid point forward with u ≡ u_const and labels it with the
/// settled value of the observable: the run stops as soon as the trailing
/// window varies by less than settle_tol.
BasinGridResult basin_map(const DiscreteSystem& system, const PointInitializer& init,
                          const BasinGrid& grid, const BasinOptions& options);

/// Model overload; points are initialized with delay_init_from_point.
BasinGridResult basin_map(const KoopmanModel& model, const BasinGrid& grid,
                          const BasinOptions& options);

/// Fraction of cells whose labels differ by less than `tol` (two NaN labels agree).
double basin_agreement(const BasinGridResult& a, const BasinGridResult& b, double tol = 0.1);

// ---------------------------------------------------------------------------
// Limit cycles

struct CycleOptions {
  Index observable = 0;
  double threshold = 0.0;
  Index transient = 2000;  // steps discarded before crossings are examined
  Index max_steps = 20000;
  double rel_tol = 0.005;  // agreement required between consecutive cycles
  Index cycles_to_check = 3;
};

struct CycleResult {
  double period = 0.0;  // time units
  Matrix samples;       // state × round(period/dt), one period
  Index transient_steps = 0;
  bool converged = false;
  Index start_step = 0;        // absolute step of samples.col(0)
  double start_phase = 0.0;    // phase of samples.col(0), radians in [0, 2π)
  double amplitude = 0.0;      // peak-to-peak of the observable over one period
  Index observable = 0;
  double threshold = 0.0;
  double dt = 0.0;

  /// Phase (radians, [0, 2π)) of samples.col(j); phase zero is an upward
  /// threshold crossing.
  double phase_of(Index j) const;
};

/// Iterates from x0 with zero input. Throws NumericalError when the run
/// diverges or shows no crossings after the transient.
CycleResult find_limit_cycle(const DiscreteSystem& system, const Vector& x0,
                             const CycleOptions& options);

// ---------------------------------------------------------------------------
// Fixed points

struct FixedPointResult {
  Vector state;
  std::vector<std::complex<double>> eigenvalues;  // of the Jacobian at the root
  Index iterations = 0;
  double residual = 0.0;
};

/// Newton iteration on γ = F(γ, u_const). Throws NumericalError after 50
/// iterations without reaching tol.
FixedPointResult find_fixed_point(const KoopmanModel& model, double u_const, const Vector& guess,
                                  double tol = 1e-10);

// ---------------------------------------------------------------------------
// Phase response

struct PrcOptions {
  double magnitude = 0.1;  // M
  double duration = 0.1;   // L, rounded to whole samples
  Index settle_cycles = 20;  // K
  unsigned threads = 0;
};

struct PrcPoint {
  double phase = 0.0;  // actual start phase used (nearest cycle sample)
  double z = 0.0;      // ΔΘ / (M·L)
};

/// Direct method: start on the cycle at each phase, hold u = M for L time
/// units, then compare the first threshold crossing after K periods with the
/// nearest crossing of the unperturbed run from the same state.
std::vector<PrcPoint> estimate_prc(const DiscreteSystem& system, const CycleResult& cycle,
                                   const std::vector<double>& phases, const PrcOptions& options);

// ---------------------------------------------------------------------------
// Eigenmodes of linear models

struct Eigenmode {
  std::complex<double> eigenvalue;
  double frequency = 0.0;       // Im(log λ) / (2π dt)
  double mean_amplitude = 0.0;  // mean over snapshots of |wᵀ a_i|
};

struct EigenmodeReport {
  std::vector<Eigenmode> modes;  // sorted by amplitude, descending
  std::vector<std::string> warnings;
};

/// Left eigenvectors are the rows of V⁻¹, so wᵀv = 1. The snapshots a_i are
/// the columns of data.Gamma.
EigenmodeReport eigenmode_spectrum(const KoopmanModel& model, const LiftedData& data);

} // namespace koopid
