#pragma once

#include <complex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "koopid/dictionary.hpp"
#include "koopid/numerics.hpp"
#include "koopid/system.hpp"

namespace koopid {

// Model families. Each maps the (delay) state one sample forward:
//   Linear               x⁺ = A x
//   LinearControlled     x⁺ = A x + B u
//   Nonlinear            γ⁺ = A γ + C f(γ)
//   NonlinearControlled  γ⁺ = A γ + B u + C f(γ)
struct LinearFamily {
  Matrix A;
};
struct LinearControlledFamily {
  Matrix A, B;
};
struct NonlinearFamily {
  Matrix A, C;
};
struct NonlinearControlledFamily {
  Matrix A, B, C;
};
using ModelFamily =
    std::variant<LinearFamily, LinearControlledFamily, NonlinearFamily, NonlinearControlledFamily>;

enum class FamilyTag { Linear, LinearControlled, Nonlinear, NonlinearControlled };

std::string to_string(FamilyTag tag);
FamilyTag family_tag_from_string(const std::string& name);

/// A fitted Koopman model together with the dictionary it was trained on.
/// Immutable once constructed.
class KoopmanModel : public DiscreteSystem {
public:
  KoopmanModel(ModelFamily family, DictionarySpec spec, double dt, RankSpec fit_rank,
               StateLayout layout = StateLayout::Delay);

  const ModelFamily& family() const { return family_; }
  FamilyTag tag() const { return static_cast<FamilyTag>(family_.index()); }
  bool is_linear() const { return tag() == FamilyTag::Linear || tag() == FamilyTag::LinearControlled; }
  bool is_controlled() const {
    return tag() == FamilyTag::LinearControlled || tag() == FamilyTag::NonlinearControlled;
  }

  const Dictionary& dictionary() const { return dict_; }
  const DictionarySpec& spec() const { return dict_.spec(); }
  StateLayout layout() const { return layout_; }
  RankSpec fit_rank() const { return fit_rank_; }

  const Matrix& A() const;
  const Matrix* B() const;  // null for autonomous families
  const Matrix* C() const;  // null for linear families

  Index state_dim() const override;
  Index input_dim() const override;
  double dt() const override { return dt_; }
  Vector step(const Vector& state, const Vector& input) const override;

  /// ∂F/∂x at `state`: A + C ∂f/∂γ (inputs enter linearly).
  Matrix jacobian(const Vector& state) const;

  /// Fit-time notes, e.g. an input block that the data cannot identify.
  std::vector<std::string> warnings;

private:
  ModelFamily family_;
  Dictionary dict_;
  double dt_;
  RankSpec fit_rank_;
  StateLayout layout_;
};

/// Nonlinear model projected onto a POD basis; the state is Ω = Φᵀγ.
class ReducedModel : public DiscreteSystem {
public:
  ReducedModel(PodBasis basis, Matrix a_red, std::optional<Matrix> b_red, Matrix c_red,
               DictionarySpec spec, double dt);

  const PodBasis& basis() const { return basis_; }
  const Matrix& Ared() const { return a_red_; }
  const std::optional<Matrix>& Bred() const { return b_red_; }
  const Matrix& Cred() const { return c_red_; }
  const Dictionary& dictionary() const { return dict_; }
  const DictionarySpec& spec() const { return dict_.spec(); }

  Vector project(const Vector& gamma) const { return basis_.Phi.transpose() * gamma; }
  Vector reconstruct(const Vector& omega) const { return basis_.Phi * omega; }

  Index state_dim() const override { return basis_.rho(); }
  Index input_dim() const override { return b_red_ ? b_red_->cols() : 0; }
  double dt() const override { return dt_; }
  Vector step(const Vector& omega, const Vector& input) const override;
  double observable(const Vector& omega, Index k) const override;

private:
  PodBasis basis_;
  Matrix a_red_;
  std::optional<Matrix> b_red_;
  Matrix c_red_;
  Dictionary dict_;
  double dt_;
};

KoopmanModel fit_dmd(const LiftedData& data, RankSpec rank = full_rank);
KoopmanModel fit_edmdc(const LiftedData& data, RankSpec rank = full_rank);
KoopmanModel fit_nonlinear(const LiftedData& data, RankSpec rank = full_rank);
KoopmanModel fit_nonlinear_controlled(const LiftedData& data, RankSpec rank = full_rank);

/// Keeps the SVD of the stacked regressor so that fits at several ranks (an
/// order sweep) cost one factorization.
class KoopmanRegression {
public:
  KoopmanRegression(const LiftedData& data, FamilyTag family);

  FamilyTag family() const { return family_; }
  const TruncatedLeastSquares& solver() const { return solver_; }

  KoopmanModel fit(RankSpec rank) const;

  /// Nonzero spectrum of the state matrix (A / A_n / A_c) of the rank-r fit,
  /// from its r×r compression; no M×M eigenproblem is formed.
  std::vector<std::complex<double>> state_matrix_eigenvalues(RankSpec rank) const;

private:
  FamilyTag family_;
  Matrix targets_;
  Index state_rows_;
  Index input_rows_;
  Index lift_rows_;
  DictionarySpec spec_;
  double dt_;
  StateLayout layout_;
  bool zero_input_ = false;
  TruncatedLeastSquares solver_;
};

/// Relative training residual ||Γ⁺ - F(Γ, U)||_F / ||Γ⁺||_F.
double training_residual(const KoopmanModel& model, const LiftedData& data);

ReducedModel reduce(const KoopmanModel& model, const PodBasis& basis);

/// Rolls the model forward; inputs (q × steps) are required iff it is controlled.
Trajectory rollout(const KoopmanModel& model, const Vector& gamma0,
                   const std::optional<Matrix>& inputs, Index steps);
/// Reduced rollout started from Φᵀγ₀; returns the reconstructed states ΦΩ_i.
Trajectory rollout(const ReducedModel& model, const Vector& gamma0,
                   const std::optional<Matrix>& inputs, Index steps);

/// Packs an observable history (m × (z+1), oldest first) and an optional
/// input history (q × z, oldest first; zeros when absent) into a model state.
Vector delay_init(const KoopmanModel& model, const Matrix& observable_history,
                  const std::optional<Matrix>& input_history = std::nullopt);

/// Duffing-style initial state from a point (x1, x2): the missing past sample
/// is extrapolated backwards as x1 - dt·x2 and past inputs are zero.
Vector delay_init_from_point(const KoopmanModel& model, double x1, double x2);

} // namespace koopid
