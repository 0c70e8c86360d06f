#pragma once

#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace koopid {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;  // column-major, 64-bit
using Vector = Eigen::VectorXd;

/// Truncation rank of a least-squares solve. std::nullopt means "full".
using RankSpec = std::optional<Index>;
inline constexpr std::nullopt_t full_rank = std::nullopt;

/// Singular values below this fraction of the largest one are always dropped.
inline constexpr double kRelativeSingularFloor = 1e-12;

void require_finite(const Matrix& m, std::string_view what);
bool all_finite(const Matrix& m);

struct SvdFactors {
  Matrix U;   // left singular vectors (thin)
  Vector S;   // singular values, descending
  Matrix Vt;  // right singular vectors, transposed (thin)
};

SvdFactors thin_svd(const Matrix& a);

/// Rank-limited least squares  min_M ||Y - M Z||_F  with the SVD of the
/// regressor Z computed once, so several ranks can be solved cheaply.
class TruncatedLeastSquares {
public:
  explicit TruncatedLeastSquares(const Matrix& regressor);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  /// Number of singular values above the relative floor.
  Index numerical_rank() const { return numerical_rank_; }

  /// Rank actually used for a request: min(requested, numerical_rank).
  /// Throws std::invalid_argument for 0 or for more than min(rows, cols).
  Index effective_rank(RankSpec rank) const;

  /// M = Y Ṽ Σ̃⁻¹ Ũᵀ for the truncated factors.
  Matrix solve(const Matrix& targets, RankSpec rank) const;

  /// Factored form of solve(): M = left * right.transpose() with
  /// left = Y Ṽ Σ̃⁻¹ (p×r) and right = Ũ (s×r).
  std::pair<Matrix, Matrix> solve_factored(const Matrix& targets, RankSpec rank) const;

  const SvdFactors& factors() const { return svd_; }

private:
  Index rows_ = 0;
  Index cols_ = 0;
  Index numerical_rank_ = 0;
  SvdFactors svd_;
};

/// Returns M (p×s) minimizing ||Y - M Z̃||_F, Z̃ the rank-truncated Z.
Matrix truncated_pinv_solve(const Matrix& targets, const Matrix& regressor, RankSpec rank);

struct PodBasis {
  Matrix Phi;          // M×ρ, orthonormal columns
  Vector eigenvalues;  // all eigenvalues of ΓΓᵀ that the data supports, descending
  double energy_fraction = 0.0;

  Index rho() const { return Phi.cols(); }
};

/// Leading ρ eigenvectors of ΓΓᵀ, computed from the SVD of Γ. Each mode is
/// signed so that its largest-magnitude entry is positive.
PodBasis pod_basis(const Matrix& gamma, Index rho);

} // namespace koopid
