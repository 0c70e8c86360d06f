#pragma once

#include <optional>

#include "koopid/numerics.hpp"

namespace koopid {

/// Uniformly sampled observables g(x_i) (columns of Y) with optional inputs
/// u_i aligned column-for-column.
class ObservableSeries {
public:
  ObservableSeries(Matrix y, std::optional<Matrix> u, double dt);

  const Matrix& Y() const { return y_; }
  const std::optional<Matrix>& U() const { return u_; }
  double dt() const { return dt_; }

  Index observables() const { return y_.rows(); }
  Index inputs() const { return u_ ? u_->rows() : 0; }
  Index samples() const { return y_.cols(); }
  bool has_inputs() const { return u_.has_value(); }

  /// Columns [first, first + count).
  ObservableSeries slice(Index first, Index count) const;

private:
  Matrix y_;
  std::optional<Matrix> u_;
  double dt_;
};

} // namespace koopid
