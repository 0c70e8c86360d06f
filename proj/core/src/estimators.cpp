#include "koopid/estimators.hpp"

#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace koopid {
namespace {

void require_shape(const Matrix& m, Index rows, Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(std::string("model matrix ") + name + " is " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                ", expected " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
  require_finite(m, name);
}

Index layout_state_dim(const Dictionary& dict, StateLayout layout) {
  return layout == StateLayout::Delay ? dict.state_dim() : dict.state_dim() + dict.lift_dim();
}

bool has_inputs(FamilyTag tag) {
  return tag == FamilyTag::LinearControlled || tag == FamilyTag::NonlinearControlled;
}

bool has_lift(FamilyTag tag) {
  return tag == FamilyTag::Nonlinear || tag == FamilyTag::NonlinearControlled;
}

} // namespace

std::string to_string(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::Linear: return "dmd";
    case FamilyTag::LinearControlled: return "edmdc";
    case FamilyTag::Nonlinear: return "nonlinear";
    case FamilyTag::NonlinearControlled: return "nonlinear_controlled";
  }
  return "unknown";
}

FamilyTag family_tag_from_string(const std::string& name) {
  if (name == "dmd") return FamilyTag::Linear;
  if (name == "edmdc") return FamilyTag::LinearControlled;
  if (name == "nonlinear") return FamilyTag::Nonlinear;
  if (name == "nonlinear_controlled") return FamilyTag::NonlinearControlled;
  throw std::invalid_argument("unknown model family '" + name + "'");
}

// ---------------------------------------------------------------------------
// KoopmanModel

KoopmanModel::KoopmanModel(ModelFamily family, DictionarySpec spec, double dt, RankSpec fit_rank,
                           StateLayout layout)
    : family_(std::move(family)), dict_(std::move(spec)), dt_(dt), fit_rank_(fit_rank),
      layout_(layout) {
  if (!(dt_ > 0.0)) throw std::invalid_argument("model: dt must be positive");
  if (layout_ == StateLayout::DelayWithLift && !is_linear()) {
    throw std::invalid_argument("model: the lifted state layout is only defined for linear families");
  }
  if (is_controlled() && !dict_.controlled()) {
    throw std::invalid_argument("model: controlled family needs a spec with q > 0");
  }
  const Index n = state_dim();
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        require_shape(f.A, n, n, "A");
        if constexpr (requires { f.B; }) require_shape(f.B, n, dict_.inputs(), "B");
        if constexpr (requires { f.C; }) require_shape(f.C, n, dict_.lift_dim(), "C");
        (void)sizeof(T);
      },
      family_);
}

const Matrix& KoopmanModel::A() const {
  return std::visit([](const auto& f) -> const Matrix& { return f.A; }, family_);
}

const Matrix* KoopmanModel::B() const {
  return std::visit(
      [](const auto& f) -> const Matrix* {
        if constexpr (requires { f.B; }) return &f.B;
        else return nullptr;
      },
      family_);
}

const Matrix* KoopmanModel::C() const {
  return std::visit(
      [](const auto& f) -> const Matrix* {
        if constexpr (requires { f.C; }) return &f.C;
        else return nullptr;
      },
      family_);
}

Index KoopmanModel::state_dim() const { return layout_state_dim(dict_, layout_); }

Index KoopmanModel::input_dim() const { return is_controlled() ? dict_.inputs() : 0; }

Vector KoopmanModel::step(const Vector& state, const Vector& input) const {
  if (input.size() != input_dim()) {
    throw std::invalid_argument("model step: input has length " + std::to_string(input.size()) +
                                ", expected " + std::to_string(input_dim()));
  }
  Vector next = A() * state;
  if (const Matrix* b = B()) next.noalias() += *b * input;
  if (const Matrix* c = C(); c && c->cols() > 0) next.noalias() += *c * dict_.lift(state);
  return next;
}

Matrix KoopmanModel::jacobian(const Vector& state) const {
  Matrix jac = A();
  if (const Matrix* c = C(); c && c->cols() > 0) jac.noalias() += *c * dict_.lift_jacobian(state);
  return jac;
}

// ---------------------------------------------------------------------------
// ReducedModel

ReducedModel::ReducedModel(PodBasis basis, Matrix a_red, std::optional<Matrix> b_red, Matrix c_red,
                           DictionarySpec spec, double dt)
    : basis_(std::move(basis)), a_red_(std::move(a_red)), b_red_(std::move(b_red)),
      c_red_(std::move(c_red)), dict_(std::move(spec)), dt_(dt) {
  const Index rho = basis_.rho();
  if (basis_.Phi.rows() != dict_.state_dim()) {
    throw std::invalid_argument("reduced model: basis rows do not match the state dimension");
  }
  require_shape(a_red_, rho, rho, "Ared");
  require_shape(c_red_, rho, dict_.lift_dim(), "Cred");
  if (b_red_) require_shape(*b_red_, rho, dict_.inputs(), "Bred");
}

Vector ReducedModel::step(const Vector& omega, const Vector& input) const {
  if (input.size() != input_dim()) throw std::invalid_argument("reduced step: input length mismatch");
  Vector next = a_red_ * omega;
  if (b_red_) next.noalias() += *b_red_ * input;
  if (c_red_.cols() > 0) next.noalias() += c_red_ * dict_.lift(reconstruct(omega));
  return next;
}

double ReducedModel::observable(const Vector& omega, Index k) const {
  return basis_.Phi.row(k).dot(omega);
}

// ---------------------------------------------------------------------------
// Fitting

KoopmanRegression::KoopmanRegression(const LiftedData& data, FamilyTag family)
    : family_(family), targets_(data.GammaPlus), state_rows_(data.Gamma.rows()),
      input_rows_(has_inputs(family) && data.Uin ? data.Uin->rows() : 0),
      lift_rows_(has_lift(family) ? data.Fn.rows() : 0), spec_(data.spec), dt_(data.dt),
      layout_(data.layout),
      solver_([&] {
        const Index d = data.snapshots();
        if (d < 1) throw std::invalid_argument("fit: training data has no snapshot columns");
        if (has_inputs(family) && !data.Uin) {
          throw std::invalid_argument("fit: " + to_string(family) + " requires input data");
        }
        if (has_lift(family) && data.layout != StateLayout::Delay) {
          throw std::invalid_argument("fit: nonlinear families need the plain delay layout");
        }
        if (data.GammaPlus.cols() != d || data.Fn.cols() != d || (data.Uin && data.Uin->cols() != d)) {
          throw std::invalid_argument("fit: training blocks have inconsistent column counts");
        }
        const Index in_rows = has_inputs(family) ? data.Uin->rows() : 0;
        const Index lift_rows = has_lift(family) ? data.Fn.rows() : 0;
        Matrix regressor(data.Gamma.rows() + in_rows + lift_rows, d);
        regressor.topRows(data.Gamma.rows()) = data.Gamma;
        if (in_rows > 0) regressor.middleRows(data.Gamma.rows(), in_rows) = *data.Uin;
        if (lift_rows > 0) regressor.bottomRows(lift_rows) = data.Fn;
        return TruncatedLeastSquares(regressor);
      }()) {
  if (input_rows_ > 0) {
    for (Index r = 0; r < data.Uin->rows(); ++r) {
      if (data.Uin->row(r).cwiseAbs().maxCoeff() == 0.0) zero_input_ = true;
    }
  }
}

KoopmanModel KoopmanRegression::fit(RankSpec rank) const {
  const Matrix sol = solver_.solve(targets_, rank);
  const Index n = state_rows_;
  const Index q = input_rows_;
  const Index L = lift_rows_;
  auto model = [&]() -> KoopmanModel {
    switch (family_) {
      case FamilyTag::Linear:
        return {LinearFamily{sol}, spec_, dt_, rank, layout_};
      case FamilyTag::LinearControlled:
        return {LinearControlledFamily{sol.leftCols(n), sol.middleCols(n, q)}, spec_, dt_, rank,
                layout_};
      case FamilyTag::Nonlinear:
        return {NonlinearFamily{sol.leftCols(n), sol.rightCols(L)}, spec_, dt_, rank};
      case FamilyTag::NonlinearControlled:
        return {NonlinearControlledFamily{sol.leftCols(n), sol.middleCols(n, q), sol.rightCols(L)},
                spec_, dt_, rank};
    }
    throw std::logic_error("unreachable");
  }();
  if (zero_input_) {
    model.warnings.push_back(
        "input block is not identifiable: an input channel is identically zero in the "
        "training data; B is the minimum-norm solution");
  }
  return model;
}

std::vector<std::complex<double>> KoopmanRegression::state_matrix_eigenvalues(RankSpec rank) const {
  auto [left, right] = solver_.solve_factored(targets_, rank);
  // A = left * right.topRows(n)^T, so its nonzero spectrum is that of the r×r product.
  const Matrix compressed = right.topRows(state_rows_).transpose() * left;
  Eigen::EigenSolver<Matrix> es(compressed, false);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(compressed.rows()));
  for (Index i = 0; i < compressed.rows(); ++i) out[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
  return out;
}

KoopmanModel fit_dmd(const LiftedData& data, RankSpec rank) {
  return KoopmanRegression(data, FamilyTag::Linear).fit(rank);
}
KoopmanModel fit_edmdc(const LiftedData& data, RankSpec rank) {
  return KoopmanRegression(data, FamilyTag::LinearControlled).fit(rank);
}
KoopmanModel fit_nonlinear(const LiftedData& data, RankSpec rank) {
  return KoopmanRegression(data, FamilyTag::Nonlinear).fit(rank);
}
KoopmanModel fit_nonlinear_controlled(const LiftedData& data, RankSpec rank) {
  return KoopmanRegression(data, FamilyTag::NonlinearControlled).fit(rank);
}

double training_residual(const KoopmanModel& model, const LiftedData& data) {
  if (data.Gamma.rows() != model.state_dim()) {
    throw std::invalid_argument("training_residual: data and model state dimensions differ");
  }
  Matrix pred = model.A() * data.Gamma;
  if (const Matrix* b = model.B()) pred.noalias() += *b * *data.Uin;
  if (const Matrix* c = model.C(); c && c->cols() > 0) pred.noalias() += *c * data.Fn;
  const double denom = data.GammaPlus.norm();
  const double num = (data.GammaPlus - pred).norm();
  return denom > 0.0 ? num / denom : num;
}

// ---------------------------------------------------------------------------
// Reduction, rollout and initialization

ReducedModel reduce(const KoopmanModel& model, const PodBasis& basis) {
  if (model.is_linear()) throw std::invalid_argument("reduce: only nonlinear families are reduced");
  if (basis.Phi.rows() != model.state_dim()) {
    throw std::invalid_argument("reduce: basis has " + std::to_string(basis.Phi.rows()) +
                                " rows, model state has " + std::to_string(model.state_dim()));
  }
  const Matrix& phi = basis.Phi;
  Matrix a_red = phi.transpose() * model.A() * phi;
  Matrix c_red = phi.transpose() * *model.C();
  std::optional<Matrix> b_red;
  if (const Matrix* b = model.B()) b_red = phi.transpose() * *b;
  return ReducedModel(basis, std::move(a_red), std::move(b_red), std::move(c_red), model.spec(),
                      model.dt());
}

Trajectory rollout(const KoopmanModel& model, const Vector& gamma0,
                   const std::optional<Matrix>& inputs, Index steps) {
  if (model.is_controlled() && !inputs) {
    throw std::invalid_argument("rollout: controlled model requires inputs");
  }
  if (!model.is_controlled() && inputs) {
    // Inputs recorded alongside the data are irrelevant to autonomous families.
    return iterate(model, gamma0, std::nullopt, steps);
  }
  return iterate(model, gamma0, inputs, steps);
}

Trajectory rollout(const ReducedModel& model, const Vector& gamma0,
                   const std::optional<Matrix>& inputs, Index steps) {
  if (gamma0.size() != model.basis().Phi.rows()) {
    throw std::invalid_argument("rollout: initial state does not match the basis");
  }
  const bool controlled = model.input_dim() > 0;
  if (controlled && !inputs) throw std::invalid_argument("rollout: controlled model requires inputs");
  Trajectory reduced = iterate(model, model.project(gamma0),
                               controlled ? inputs : std::optional<Matrix>{}, steps);
  Trajectory out;
  out.states = model.basis().Phi * reduced.states;
  out.diverged = reduced.diverged;
  out.divergence_step = reduced.divergence_step;
  return out;
}

Vector delay_init(const KoopmanModel& model, const Matrix& observable_history,
                  const std::optional<Matrix>& input_history) {
  const Dictionary& dict = model.dictionary();
  Vector gamma = dict.pack_history(observable_history, input_history);
  if (model.layout() == StateLayout::DelayWithLift) {
    Vector a(model.state_dim());
    a.head(gamma.size()) = gamma;
    a.tail(dict.lift_dim()) = dict.lift(gamma);
    return a;
  }
  return gamma;
}

Vector delay_init_from_point(const KoopmanModel& model, double x1, double x2) {
  const Dictionary& dict = model.dictionary();
  if (dict.observables() != 1) {
    throw std::invalid_argument("delay_init_from_point: needs a single observable");
  }
  const Index z = dict.delay();
  Matrix history(1, z + 1);
  for (Index k = 0; k <= z; ++k) {
    history(0, z - k) = x1 - static_cast<double>(k) * model.dt() * x2;
  }
  return delay_init(model, history, std::nullopt);
}

} // namespace koopid
