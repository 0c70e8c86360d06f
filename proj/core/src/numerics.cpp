#include "koopid/numerics.hpp"

#include <stdexcept>
#include <string>

namespace koopid {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + " contains non-finite entries");
  }
}

SvdFactors thin_svd(const Matrix& a) {
  if (a.size() == 0) throw std::invalid_argument("thin_svd: empty matrix");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SvdFactors{svd.matrixU(), svd.singularValues(), svd.matrixV().transpose()};
}

TruncatedLeastSquares::TruncatedLeastSquares(const Matrix& regressor)
    : rows_(regressor.rows()), cols_(regressor.cols()) {
  if (cols_ == 0) throw std::invalid_argument("least squares: regressor has no snapshot columns");
  if (rows_ == 0) throw std::invalid_argument("least squares: regressor has no rows");
  require_finite(regressor, "regressor");
  svd_ = thin_svd(regressor);
  const double floor = kRelativeSingularFloor * svd_.S(0);
  numerical_rank_ = 0;
  while (numerical_rank_ < svd_.S.size() && svd_.S(numerical_rank_) > floor) ++numerical_rank_;
}

Index TruncatedLeastSquares::effective_rank(RankSpec rank) const {
  if (rank) {
    if (*rank <= 0) throw std::invalid_argument("least squares: rank must be positive");
    if (*rank > std::min(rows_, cols_)) {
      throw std::invalid_argument("least squares: rank " + std::to_string(*rank) +
                                  " exceeds min(rows, cols) = " +
                                  std::to_string(std::min(rows_, cols_)));
    }
    return std::min(*rank, numerical_rank_);
  }
  return numerical_rank_;
}

std::pair<Matrix, Matrix> TruncatedLeastSquares::solve_factored(const Matrix& targets,
                                                                RankSpec rank) const {
  if (targets.cols() != cols_) {
    throw std::invalid_argument("least squares: target has " + std::to_string(targets.cols()) +
                                " columns, regressor has " + std::to_string(cols_));
  }
  require_finite(targets, "targets");
  const Index r = effective_rank(rank);
  Matrix left = targets * svd_.Vt.topRows(r).transpose();
  left *= svd_.S.head(r).cwiseInverse().asDiagonal();
  return {std::move(left), svd_.U.leftCols(r)};
}

Matrix TruncatedLeastSquares::solve(const Matrix& targets, RankSpec rank) const {
  auto [left, right] = solve_factored(targets, rank);
  return left * right.transpose();
}

Matrix truncated_pinv_solve(const Matrix& targets, const Matrix& regressor, RankSpec rank) {
  if (targets.cols() != regressor.cols()) {
    throw std::invalid_argument("truncated_pinv_solve: column counts differ");
  }
  return TruncatedLeastSquares(regressor).solve(targets, rank);
}

PodBasis pod_basis(const Matrix& gamma, Index rho) {
  if (gamma.size() == 0) throw std::invalid_argument("pod_basis: empty snapshot matrix");
  if (rho < 1 || rho > std::min(gamma.rows(), gamma.cols())) {
    throw std::invalid_argument("pod_basis: rho must lie in [1, min(rows, cols)]");
  }
  require_finite(gamma, "snapshot matrix");

  const SvdFactors svd = thin_svd(gamma);
  PodBasis basis;
  basis.eigenvalues = svd.S.array().square();
  basis.Phi = svd.U.leftCols(rho);
  for (Index k = 0; k < rho; ++k) {
    Index imax = 0;
    basis.Phi.col(k).cwiseAbs().maxCoeff(&imax);
    if (basis.Phi(imax, k) < 0.0) basis.Phi.col(k) *= -1.0;
  }
  const double total = basis.eigenvalues.sum();
  basis.energy_fraction = total > 0.0 ? basis.eigenvalues.head(rho).sum() / total : 1.0;
  return basis;
}

} // namespace koopid
