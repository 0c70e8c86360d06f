#include "koopid/series.hpp"

#include <cmath>
#include <stdexcept>

namespace koopid {

ObservableSeries::ObservableSeries(Matrix y, std::optional<Matrix> u, double dt)
    : y_(std::move(y)), u_(std::move(u)), dt_(dt) {
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) {
    throw std::invalid_argument("ObservableSeries: dt must be positive and finite");
  }
  if (y_.rows() < 1) throw std::invalid_argument("ObservableSeries: need at least one observable");
  if (y_.cols() < 2) throw std::invalid_argument("ObservableSeries: need at least two samples");
  require_finite(y_, "observable matrix");
  if (u_) {
    if (u_->cols() != y_.cols()) {
      throw std::invalid_argument("ObservableSeries: input and observable sample counts differ");
    }
    if (u_->rows() < 1) throw std::invalid_argument("ObservableSeries: input matrix has no rows");
    require_finite(*u_, "input matrix");
  }
}

ObservableSeries ObservableSeries::slice(Index first, Index count) const {
  if (first < 0 || count < 2 || first + count > samples()) {
    throw std::invalid_argument("ObservableSeries::slice: range out of bounds");
  }
  std::optional<Matrix> u;
  if (u_) u = u_->middleCols(first, count);
  return ObservableSeries(y_.middleCols(first, count), std::move(u), dt_);
}

} // namespace koopid
