#include "koopid/system.hpp"

#include <stdexcept>
#include <string>

namespace koopid {
namespace {

bool within_bound(const Vector& x) {
  return x.allFinite() && (x.size() == 0 || x.cwiseAbs().maxCoeff() <= kDivergenceBound);
}

template <typename InputAt>
Trajectory run(const DiscreteSystem& system, const Vector& x0, Index steps, InputAt input_at) {
  if (steps < 0) throw std::invalid_argument("iterate: negative step count");
  if (x0.size() != system.state_dim()) {
    throw std::invalid_argument("iterate: initial state has length " + std::to_string(x0.size()) +
                                ", system state has " + std::to_string(system.state_dim()));
  }
  Trajectory traj;
  traj.states.resize(system.state_dim(), steps + 1);
  traj.states.col(0) = x0;
  Vector x = x0;
  for (Index i = 0; i < steps; ++i) {
    x = system.step(x, input_at(i));
    if (!within_bound(x)) {
      traj.diverged = true;
      traj.divergence_step = i + 1;
      traj.states.conservativeResize(Eigen::NoChange, i + 1);
      return traj;
    }
    traj.states.col(i + 1) = x;
  }
  return traj;
}

} // namespace

Trajectory iterate(const DiscreteSystem& system, const Vector& x0,
                   const std::optional<Matrix>& inputs, Index steps) {
  const Index q = system.input_dim();
  if (q > 0) {
    if (!inputs) throw std::invalid_argument("iterate: controlled system requires inputs");
    if (inputs->rows() != q || inputs->cols() < steps) {
      throw std::invalid_argument("iterate: inputs must be q x steps");
    }
    return run(system, x0, steps, [&](Index i) -> Vector { return inputs->col(i); });
  }
  if (inputs && inputs->rows() > 0) {
    throw std::invalid_argument("iterate: inputs given for a system without inputs");
  }
  const Vector none;
  return run(system, x0, steps, [&](Index) -> const Vector& { return none; });
}

Trajectory iterate_constant(const DiscreteSystem& system, const Vector& x0, double u_const,
                            Index steps) {
  const Vector u = Vector::Constant(system.input_dim(), u_const);
  return run(system, x0, steps, [&](Index) -> const Vector& { return u; });
}

} // namespace koopid
