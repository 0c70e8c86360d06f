#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "koopid/numerics.hpp"
#include "koopid/series.hpp"

namespace koopid {

/// Version tag of the monomial ordering below; persisted in model archives.
inline constexpr int kMonomialOrderVersion = 1;

enum class PolynomialScope { LatestFrame, AllFrames };

struct NoLifting {};

/// All monomials with total degree in [min_degree, max_degree]. Ordered by
/// degree, then by the nondecreasing variable-index tuple (i1 <= ... <= ik) in
/// lexicographic order, i.e. graded lex with x0 > x1 > ...
struct PolynomialLifting {
  int min_degree = 2;
  int max_degree = 2;
  PolynomialScope scope = PolynomialScope::LatestFrame;
};

/// Entry j is ||g - c_j||_2 for the newest raw observables g; centers are m×J.
struct RbfLifting {
  Matrix centers;
};

/// Radial functions first, then monomials of the J radial outputs.
struct ComposedLifting {
  Matrix rbf_centers;
  int poly_min_degree = 2;
  int poly_max_degree = 2;
};

using LiftingSpec = std::variant<NoLifting, PolynomialLifting, RbfLifting, ComposedLifting>;

bool same_lifting(const LiftingSpec& a, const LiftingSpec& b);

/// Declarative description of the delay state and its liftings.
///   frame h(x)   = [g; pre_lift(g)]                       (m + b)
///   state γ      = [h_i; ...; h_{i-z}; u_{i-1}; ...; u_{i-z}]
///   lift  f(γ)   = lift applied to the frames of γ        (L)
/// Inputs never enter the lifting.
struct DictionarySpec {
  Index m = 1;
  Index q = 0;  // 0: autonomous
  Index z = 0;
  LiftingSpec pre_lift = NoLifting{};
  LiftingSpec lift = NoLifting{};

  bool controlled() const { return q > 0; }
  bool operator==(const DictionarySpec& other) const;
};

/// Layout of the per-snapshot frame block seen by a lifting.
struct FrameDims {
  Index frame = 1;  // m + b
  Index z = 0;
  Index q = 0;
};

/// Number of monomials in n_vars variables with total degree in [min, max].
std::uint64_t dict_output_dim(Index n_vars, int min_degree, int max_degree);

/// Precomputed monomial table; evaluation costs one multiply per monomial.
class MonomialTable {
public:
  MonomialTable(Index n_vars, int min_degree, int max_degree);

  Index n_vars() const { return n_vars_; }
  Index size() const { return static_cast<Index>(outputs_); }

  void evaluate(const double* x, double* out) const;
  /// size() × n_vars() Jacobian, written into `out` (resized).
  void jacobian(const double* x, Matrix& out) const;

  /// Variable tuple (nondecreasing) of output monomial k.
  std::span<const Index> variables(Index k) const;

private:
  Index n_vars_;
  std::size_t first_output_ = 0;
  std::size_t outputs_ = 0;
  std::vector<std::int64_t> parent_;  // -1 for degree one
  std::vector<Index> last_var_;
  std::vector<Index> tuple_offsets_;  // per output, into tuple_vars_
  std::vector<Index> tuple_vars_;
};

/// One compiled lifting: reads the first input_count() entries of its argument.
class CompiledLifting {
public:
  CompiledLifting() = default;
  CompiledLifting(const LiftingSpec& spec, const FrameDims& dims);

  Index input_count() const { return input_count_; }
  Index output_dim() const { return output_dim_; }

  void evaluate(const double* x, double* out) const;
  /// output_dim() × input_count().
  Matrix jacobian(const double* x) const;

private:
  enum class Kind { None, Polynomial, Rbf, Composed } kind_ = Kind::None;
  Index input_count_ = 0;
  Index output_dim_ = 0;
  Matrix centers_;
  std::shared_ptr<const MonomialTable> table_;
};

enum class StateLayout {
  Delay,          // γ
  DelayWithLift,  // a = [γ; f(γ)], used by linear estimators on the lifted state
};

/// Training matrices for the estimators; every block has d columns.
struct LiftedData {
  Matrix Gamma;
  Matrix GammaPlus;
  std::optional<Matrix> Uin;
  Matrix Fn;
  DictionarySpec spec;
  double dt = 1.0;
  StateLayout layout = StateLayout::Delay;

  Index snapshots() const { return Gamma.cols(); }
};

/// Compiled form of a DictionarySpec. Immutable and cheap to share.
class Dictionary {
public:
  explicit Dictionary(DictionarySpec spec);

  const DictionarySpec& spec() const { return spec_; }
  Index observables() const { return spec_.m; }
  Index inputs() const { return spec_.q; }
  Index delay() const { return spec_.z; }
  bool controlled() const { return spec_.controlled(); }

  Index pre_lift_dim() const { return pre_.output_dim(); }   // b
  Index frame_dim() const { return spec_.m + pre_.output_dim(); }
  Index state_dim() const;                                   // M or M_c
  Index lift_dim() const { return lift_.output_dim(); }      // L

  /// h(g) = [g; pre_lift(g)].
  Vector frame(const Eigen::Ref<const Vector>& g) const;
  /// f(γ); only the observable frames of γ are read.
  Vector lift(const Eigen::Ref<const Vector>& gamma) const;
  void lift_into(const Eigen::Ref<const Vector>& gamma, Eigen::Ref<Vector> out) const;
  /// ∂f/∂γ, L × state_dim().
  Matrix lift_jacobian(const Eigen::Ref<const Vector>& gamma) const;

  /// γ_i (or γ_{c,i}) built from the series; requires z <= i < T.
  Vector delay_state(const ObservableSeries& series, Index i) const;

  /// γ from an observable history (m×(z+1), oldest column first) and an
  /// optional input history (q×z, oldest first; zeros when absent).
  Vector pack_history(const Matrix& observable_history,
                      const std::optional<Matrix>& input_history) const;

  LiftedData assemble(const ObservableSeries& series) const;

private:
  void check_series(const ObservableSeries& series) const;

  DictionarySpec spec_;
  CompiledLifting pre_;
  CompiledLifting lift_;
};

Vector build_delay_state(const ObservableSeries& series, const DictionarySpec& spec, Index i);
Vector eval_lift(const LiftingSpec& spec, const Vector& gamma, const FrameDims& dims);
LiftedData assemble(const ObservableSeries& series, const DictionarySpec& spec);

/// Column-wise concatenation of training sets built with the same spec, e.g.
/// several trajectories. The result is a valid LiftedData for every fit.
LiftedData concat(std::span<const LiftedData> parts);

/// Re-expresses data on the lifted state a = [γ; f(γ)] with an empty lift, for
/// linear EDMD/EDMDc fits that predict dictionary entries linearly.
LiftedData augment_with_lift(const LiftedData& data);

/// J centers drawn uniformly in the box [lo, hi] (per-coordinate).
Matrix sample_rbf_centers(const Vector& lo, const Vector& hi, Index count, std::uint64_t seed);

} // namespace koopid
