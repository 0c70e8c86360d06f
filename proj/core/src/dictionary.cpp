#include "koopid/dictionary.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "koopid/random.hpp"

namespace koopid {
namespace {

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // r * (n - k + i) / i stays integral at every step
    const std::uint64_t num = n - k + i;
    if (r > std::numeric_limits<std::uint64_t>::max() / num) {
      throw std::overflow_error("dict_output_dim: monomial count overflows 64 bits");
    }
    r = r * num / i;
  }
  return r;
}

void check_degrees(int min_degree, int max_degree) {
  if (min_degree < 2) {
    throw std::invalid_argument("polynomial lifting: min_degree must be >= 2 (degree-1 terms live in the state)");
  }
  if (max_degree < min_degree) {
    throw std::invalid_argument("polynomial lifting: max_degree must be >= min_degree");
  }
}

} // namespace

bool same_lifting(const LiftingSpec& a, const LiftingSpec& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      [&](const auto& lhs) -> bool {
        using T = std::decay_t<decltype(lhs)>;
        const auto& rhs = std::get<T>(b);
        if constexpr (std::is_same_v<T, NoLifting>) {
          return true;
        } else if constexpr (std::is_same_v<T, PolynomialLifting>) {
          return lhs.min_degree == rhs.min_degree && lhs.max_degree == rhs.max_degree &&
                 lhs.scope == rhs.scope;
        } else if constexpr (std::is_same_v<T, RbfLifting>) {
          return same_matrix(lhs.centers, rhs.centers);
        } else {
          return same_matrix(lhs.rbf_centers, rhs.rbf_centers) &&
                 lhs.poly_min_degree == rhs.poly_min_degree &&
                 lhs.poly_max_degree == rhs.poly_max_degree;
        }
      },
      a);
}

bool DictionarySpec::operator==(const DictionarySpec& other) const {
  return m == other.m && q == other.q && z == other.z && same_lifting(pre_lift, other.pre_lift) &&
         same_lifting(lift, other.lift);
}

std::uint64_t dict_output_dim(Index n_vars, int min_degree, int max_degree) {
  if (n_vars < 1) throw std::invalid_argument("dict_output_dim: n_vars must be >= 1");
  check_degrees(min_degree, max_degree);
  std::uint64_t total = 0;
  for (int k = min_degree; k <= max_degree; ++k) {
    total += binomial(static_cast<std::uint64_t>(n_vars) + k - 1, static_cast<std::uint64_t>(k));
  }
  return total;
}

// ---------------------------------------------------------------------------
// MonomialTable

MonomialTable::MonomialTable(Index n_vars, int min_degree, int max_degree) : n_vars_(n_vars) {
  outputs_ = dict_output_dim(n_vars, min_degree, max_degree);

  // Degree-k tuples extend each degree-(k-1) tuple (lex order) by a last
  // variable >= its current last one; this keeps lex order within a degree.
  for (Index v = 0; v < n_vars; ++v) {
    parent_.push_back(-1);
    last_var_.push_back(v);
  }
  std::size_t prev_begin = 0;
  std::size_t prev_end = parent_.size();
  for (int k = 2; k <= max_degree; ++k) {
    if (k == min_degree) first_output_ = prev_end;
    for (std::size_t p = prev_begin; p < prev_end; ++p) {
      for (Index v = last_var_[p]; v < n_vars; ++v) {
        parent_.push_back(static_cast<std::int64_t>(p));
        last_var_.push_back(v);
      }
    }
    prev_begin = prev_end;
    prev_end = parent_.size();
  }

  tuple_offsets_.reserve(outputs_ + 1);
  for (std::size_t j = first_output_; j < parent_.size(); ++j) {
    tuple_offsets_.push_back(static_cast<Index>(tuple_vars_.size()));
    std::vector<Index> tuple;
    for (std::int64_t node = static_cast<std::int64_t>(j); node >= 0; node = parent_[node]) {
      tuple.push_back(last_var_[node]);
    }
    tuple_vars_.insert(tuple_vars_.end(), tuple.rbegin(), tuple.rend());
  }
  tuple_offsets_.push_back(static_cast<Index>(tuple_vars_.size()));
}

void MonomialTable::evaluate(const double* x, double* out) const {
  // Degrees below min_degree are needed as parents only.
  thread_local std::vector<double> scratch;
  scratch.resize(parent_.size());
  for (std::size_t j = 0; j < parent_.size(); ++j) {
    const double v = x[last_var_[j]];
    scratch[j] = parent_[j] < 0 ? v : scratch[static_cast<std::size_t>(parent_[j])] * v;
  }
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(first_output_), scratch.end(), out);
}

void MonomialTable::jacobian(const double* x, Matrix& out) const {
  out.setZero(size(), n_vars_);
  for (Index k = 0; k < size(); ++k) {
    const auto vars = variables(k);
    // d/dx_v of prod x_{i_j}: sum over the positions holding v.
    for (std::size_t pos = 0; pos < vars.size(); ++pos) {
      double prod = 1.0;
      for (std::size_t other = 0; other < vars.size(); ++other) {
        if (other != pos) prod *= x[vars[other]];
      }
      out(k, vars[pos]) += prod;
    }
  }
}

std::span<const Index> MonomialTable::variables(Index k) const {
  const auto begin = static_cast<std::size_t>(tuple_offsets_[static_cast<std::size_t>(k)]);
  const auto end = static_cast<std::size_t>(tuple_offsets_[static_cast<std::size_t>(k) + 1]);
  return {tuple_vars_.data() + begin, end - begin};
}

// ---------------------------------------------------------------------------
// CompiledLifting

CompiledLifting::CompiledLifting(const LiftingSpec& spec, const FrameDims& dims) {
  if (dims.frame < 1 || dims.z < 0 || dims.q < 0) {
    throw std::invalid_argument("lifting: invalid frame dimensions");
  }
  auto check_centers = [&](const Matrix& c) {
    if (c.cols() < 1 || c.rows() < 1) throw std::invalid_argument("rbf lifting: no centers");
    if (c.rows() > dims.frame) {
      throw std::invalid_argument("rbf lifting: center dimension exceeds frame dimension");
    }
    require_finite(c, "rbf centers");
  };

  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, NoLifting>) {
          kind_ = Kind::None;
        } else if constexpr (std::is_same_v<T, PolynomialLifting>) {
          check_degrees(s.min_degree, s.max_degree);
          kind_ = Kind::Polynomial;
          input_count_ = s.scope == PolynomialScope::AllFrames ? (dims.z + 1) * dims.frame : dims.frame;
          table_ = std::make_shared<MonomialTable>(input_count_, s.min_degree, s.max_degree);
          output_dim_ = table_->size();
        } else if constexpr (std::is_same_v<T, RbfLifting>) {
          check_centers(s.centers);
          kind_ = Kind::Rbf;
          centers_ = s.centers;
          input_count_ = centers_.rows();
          output_dim_ = centers_.cols();
        } else {
          check_centers(s.rbf_centers);
          check_degrees(s.poly_min_degree, s.poly_max_degree);
          kind_ = Kind::Composed;
          centers_ = s.rbf_centers;
          input_count_ = centers_.rows();
          table_ = std::make_shared<MonomialTable>(centers_.cols(), s.poly_min_degree,
                                                   s.poly_max_degree);
          output_dim_ = table_->size();
        }
      },
      spec);
}

void CompiledLifting::evaluate(const double* x, double* out) const {
  switch (kind_) {
    case Kind::None:
      return;
    case Kind::Polynomial:
      table_->evaluate(x, out);
      return;
    case Kind::Rbf:
    case Kind::Composed: {
      const Eigen::Map<const Vector> g(x, input_count_);
      if (kind_ == Kind::Rbf) {
        for (Index j = 0; j < centers_.cols(); ++j) out[j] = (g - centers_.col(j)).norm();
      } else {
        Vector radial(centers_.cols());
        for (Index j = 0; j < centers_.cols(); ++j) radial(j) = (g - centers_.col(j)).norm();
        table_->evaluate(radial.data(), out);
      }
      return;
    }
  }
}

Matrix CompiledLifting::jacobian(const double* x) const {
  Matrix jac = Matrix::Zero(output_dim_, input_count_);
  switch (kind_) {
    case Kind::None:
      break;
    case Kind::Polynomial:
      table_->jacobian(x, jac);
      break;
    case Kind::Rbf:
    case Kind::Composed: {
      const Eigen::Map<const Vector> g(x, input_count_);
      // d||g - c|| / dg = (g - c)/||g - c||, zero at the center itself.
      Matrix radial_jac = Matrix::Zero(centers_.cols(), input_count_);
      Vector radial(centers_.cols());
      for (Index j = 0; j < centers_.cols(); ++j) {
        const Vector diff = g - centers_.col(j);
        radial(j) = diff.norm();
        if (radial(j) > 0.0) radial_jac.row(j) = diff.transpose() / radial(j);
      }
      if (kind_ == Kind::Rbf) {
        jac = radial_jac;
      } else {
        Matrix poly_jac;
        table_->jacobian(radial.data(), poly_jac);
        jac = poly_jac * radial_jac;
      }
      break;
    }
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Dictionary

Dictionary::Dictionary(DictionarySpec spec) : spec_(std::move(spec)) {
  if (spec_.m < 1) throw std::invalid_argument("dictionary: m must be >= 1");
  if (spec_.q < 0) throw std::invalid_argument("dictionary: q must be >= 0");
  if (spec_.z < 0) throw std::invalid_argument("dictionary: z must be >= 0");
  pre_ = CompiledLifting(spec_.pre_lift, FrameDims{spec_.m, 0, 0});
  lift_ = CompiledLifting(spec_.lift, FrameDims{frame_dim(), spec_.z, spec_.q});
}

Index Dictionary::state_dim() const {
  return (spec_.z + 1) * frame_dim() + spec_.z * spec_.q;
}

Vector Dictionary::frame(const Eigen::Ref<const Vector>& g) const {
  if (g.size() != spec_.m) throw std::invalid_argument("dictionary: observable length mismatch");
  Vector h(frame_dim());
  h.head(spec_.m) = g;
  if (pre_.output_dim() > 0) {
    const Vector gc = g;
    pre_.evaluate(gc.data(), h.data() + spec_.m);
  }
  return h;
}

void Dictionary::lift_into(const Eigen::Ref<const Vector>& gamma, Eigen::Ref<Vector> out) const {
  if (gamma.size() != state_dim()) {
    throw std::invalid_argument("eval_lift: state has length " + std::to_string(gamma.size()) +
                                ", expected " + std::to_string(state_dim()));
  }
  if (out.size() != lift_dim()) throw std::invalid_argument("eval_lift: output length mismatch");
  if (lift_dim() == 0) return;
  if (gamma.innerStride() == 1) {
    lift_.evaluate(gamma.data(), out.data());
  } else {
    const Vector copy = gamma;
    lift_.evaluate(copy.data(), out.data());
  }
}

Vector Dictionary::lift(const Eigen::Ref<const Vector>& gamma) const {
  Vector out(lift_dim());
  lift_into(gamma, out);
  return out;
}

Matrix Dictionary::lift_jacobian(const Eigen::Ref<const Vector>& gamma) const {
  if (gamma.size() != state_dim()) throw std::invalid_argument("lift_jacobian: state length mismatch");
  Matrix jac = Matrix::Zero(lift_dim(), state_dim());
  if (lift_dim() == 0) return jac;
  const Vector copy = gamma;
  jac.leftCols(lift_.input_count()) = lift_.jacobian(copy.data());
  return jac;
}

void Dictionary::check_series(const ObservableSeries& series) const {
  if (series.observables() != spec_.m) {
    throw std::invalid_argument("dictionary: series has " + std::to_string(series.observables()) +
                                " observables, spec expects " + std::to_string(spec_.m));
  }
  if (controlled()) {
    if (!series.has_inputs()) throw std::invalid_argument("dictionary: controlled spec needs inputs");
    if (series.inputs() != spec_.q) {
      throw std::invalid_argument("dictionary: series has " + std::to_string(series.inputs()) +
                                  " inputs, spec expects " + std::to_string(spec_.q));
    }
  }
}

Vector Dictionary::delay_state(const ObservableSeries& series, Index i) const {
  check_series(series);
  if (i < 0 || i >= series.samples()) throw std::invalid_argument("delay_state: index out of range");
  if (i < spec_.z) {
    throw std::invalid_argument("delay_state: index " + std::to_string(i) +
                                " has insufficient history for delay depth " +
                                std::to_string(spec_.z));
  }
  const Index fd = frame_dim();
  Vector gamma(state_dim());
  for (Index k = 0; k <= spec_.z; ++k) {
    gamma.segment(k * fd, fd) = frame(series.Y().col(i - k));
  }
  const Index base = (spec_.z + 1) * fd;
  for (Index k = 1; k <= spec_.z && controlled(); ++k) {
    gamma.segment(base + (k - 1) * spec_.q, spec_.q) = series.U()->col(i - k);
  }
  return gamma;
}

Vector Dictionary::pack_history(const Matrix& observable_history,
                                const std::optional<Matrix>& input_history) const {
  if (observable_history.rows() != spec_.m || observable_history.cols() != spec_.z + 1) {
    throw std::invalid_argument("delay_init: observable history must be m x (z+1)");
  }
  if (input_history) {
    if (!controlled()) throw std::invalid_argument("delay_init: input history given for autonomous model");
    if (input_history->rows() != spec_.q || input_history->cols() != spec_.z) {
      throw std::invalid_argument("delay_init: input history must be q x z");
    }
  }
  const Index fd = frame_dim();
  Vector gamma = Vector::Zero(state_dim());
  for (Index k = 0; k <= spec_.z; ++k) {
    gamma.segment(k * fd, fd) = frame(observable_history.col(spec_.z - k));
  }
  if (input_history) {
    const Index base = (spec_.z + 1) * fd;
    for (Index k = 1; k <= spec_.z; ++k) {
      gamma.segment(base + (k - 1) * spec_.q, spec_.q) = input_history->col(spec_.z - k);
    }
  }
  return gamma;
}

LiftedData Dictionary::assemble(const ObservableSeries& series) const {
  check_series(series);
  const Index T = series.samples();
  if (T < spec_.z + 2) {
    throw std::invalid_argument("assemble: series of length " + std::to_string(T) +
                                " is too short for delay depth " + std::to_string(spec_.z));
  }
  const Index d = T - spec_.z - 1;
  const Index fd = frame_dim();

  Matrix frames(fd, T);
  for (Index t = 0; t < T; ++t) frames.col(t) = frame(series.Y().col(t));

  // Column c of `states` is γ_{z+c}; Γ and Γ⁺ are overlapping windows of it.
  Matrix states(state_dim(), d + 1);
  const Index base = (spec_.z + 1) * fd;
  for (Index c = 0; c <= d; ++c) {
    const Index i = spec_.z + c;
    for (Index k = 0; k <= spec_.z; ++k) states.block(k * fd, c, fd, 1) = frames.col(i - k);
    for (Index k = 1; k <= spec_.z && controlled(); ++k) {
      states.block(base + (k - 1) * spec_.q, c, spec_.q, 1) = series.U()->col(i - k);
    }
  }

  LiftedData data;
  data.Gamma = states.leftCols(d);
  data.GammaPlus = states.rightCols(d);
  if (controlled()) data.Uin = series.U()->middleCols(spec_.z, d);
  data.Fn.resize(lift_dim(), d);
  for (Index c = 0; c < d && lift_dim() > 0; ++c) {
    lift_.evaluate(data.Gamma.col(c).data(), data.Fn.col(c).data());
  }
  data.spec = spec_;
  data.dt = series.dt();
  return data;
}

// ---------------------------------------------------------------------------
// Free functions

Vector build_delay_state(const ObservableSeries& series, const DictionarySpec& spec, Index i) {
  return Dictionary(spec).delay_state(series, i);
}

Vector eval_lift(const LiftingSpec& spec, const Vector& gamma, const FrameDims& dims) {
  const CompiledLifting lifting(spec, dims);
  const Index expected = (dims.z + 1) * dims.frame + dims.z * dims.q;
  if (gamma.size() != expected) {
    throw std::invalid_argument("eval_lift: state has length " + std::to_string(gamma.size()) +
                                ", expected " + std::to_string(expected));
  }
  Vector out(lifting.output_dim());
  lifting.evaluate(gamma.data(), out.data());
  return out;
}

LiftedData assemble(const ObservableSeries& series, const DictionarySpec& spec) {
  return Dictionary(spec).assemble(series);
}

LiftedData concat(std::span<const LiftedData> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no training sets");
  const LiftedData& first = parts.front();
  Index d = 0;
  for (const auto& p : parts) {
    if (!(p.spec == first.spec) || p.layout != first.layout || p.dt != first.dt ||
        p.Uin.has_value() != first.Uin.has_value()) {
      throw std::invalid_argument("concat: training sets were built with different specs");
    }
    d += p.snapshots();
  }
  LiftedData out;
  out.spec = first.spec;
  out.dt = first.dt;
  out.layout = first.layout;
  out.Gamma.resize(first.Gamma.rows(), d);
  out.GammaPlus.resize(first.GammaPlus.rows(), d);
  out.Fn.resize(first.Fn.rows(), d);
  if (first.Uin) out.Uin = Matrix(first.Uin->rows(), d);
  Index col = 0;
  for (const auto& p : parts) {
    const Index n = p.snapshots();
    out.Gamma.middleCols(col, n) = p.Gamma;
    out.GammaPlus.middleCols(col, n) = p.GammaPlus;
    out.Fn.middleCols(col, n) = p.Fn;
    if (out.Uin) out.Uin->middleCols(col, n) = *p.Uin;
    col += n;
  }
  return out;
}

LiftedData augment_with_lift(const LiftedData& data) {
  if (data.layout != StateLayout::Delay) {
    throw std::invalid_argument("augment_with_lift: data is already on the lifted state");
  }
  const Dictionary dict(data.spec);
  const Index d = data.snapshots();
  const Index M = data.Gamma.rows();
  const Index L = data.Fn.rows();

  LiftedData out;
  out.spec = data.spec;
  out.dt = data.dt;
  out.layout = StateLayout::DelayWithLift;
  out.Uin = data.Uin;
  out.Gamma.resize(M + L, d);
  out.Gamma.topRows(M) = data.Gamma;
  out.Gamma.bottomRows(L) = data.Fn;
  out.GammaPlus.resize(M + L, d);
  out.GammaPlus.topRows(M) = data.GammaPlus;
  for (Index c = 0; c < d; ++c) {
    out.GammaPlus.col(c).tail(L) = dict.lift(data.GammaPlus.col(c));
  }
  out.Fn.resize(0, d);
  return out;
}

Matrix sample_rbf_centers(const Vector& lo, const Vector& hi, Index count, std::uint64_t seed) {
  if (lo.size() != hi.size() || lo.size() < 1) {
    throw std::invalid_argument("sample_rbf_centers: box bounds must have equal positive length");
  }
  if (count < 1) throw std::invalid_argument("sample_rbf_centers: count must be >= 1");
  if ((hi.array() < lo.array()).any()) throw std::invalid_argument("sample_rbf_centers: hi < lo");
  RandomStream rng(seed);
  Matrix centers(lo.size(), count);
  for (Index j = 0; j < count; ++j) {
    for (Index r = 0; r < lo.size(); ++r) centers(r, j) = rng.uniform(lo(r), hi(r));
  }
  return centers;
}

} // namespace koopid
