#pragma once

#include <optional>

#include "koopid/numerics.hpp"

namespace koopid {

/// A sampled dynamical system x_{i+1} = F(x_i, u_i). Fitted models and the
/// reference simulators both implement it, so every analysis routine can be
/// run on either side of a comparison with identical code.
class DiscreteSystem {
public:
  virtual ~DiscreteSystem() = default;

  virtual Index state_dim() const = 0;
  virtual Index input_dim() const = 0;
  virtual double dt() const = 0;

  /// One sample interval; `input` has input_dim() entries (empty if zero).
  virtual Vector step(const Vector& state, const Vector& input) const = 0;

  /// Observable k of a state (the k-th measured quantity).
  virtual double observable(const Vector& state, Index k) const { return state(k); }
};

/// Result of iterating a system. A divergent run keeps the states computed
/// before the first non-finite (or out-of-bound) state.
struct Trajectory {
  Matrix states;  // state_dim × (steps + 1), or fewer columns when diverged
  bool diverged = false;
  std::optional<Index> divergence_step;
};

/// States with any entry beyond this magnitude count as divergent.
inline constexpr double kDivergenceBound = 1e100;

/// Iterates `steps` times. `inputs` (input_dim × steps) is required iff the
/// system takes inputs.
Trajectory iterate(const DiscreteSystem& system, const Vector& x0,
                   const std::optional<Matrix>& inputs, Index steps);

/// Iterates with a constant input (ignored by systems without inputs).
Trajectory iterate_constant(const DiscreteSystem& system, const Vector& x0, double u_const,
                            Index steps);

} // namespace koopid
