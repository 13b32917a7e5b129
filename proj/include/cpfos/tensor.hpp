#pragma once

#include <Eigen/Dense>

#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpfos/errors.hpp"

namespace cpfos {

using Index = Eigen::Index;
using Dims = std::vector<Index>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

inline Index product(std::span<const Index> dims) {
  Index n = 1;
  for (Index d : dims) n *= d;
  return n;
}

inline std::string dims_string(std::span<const Index> dims) {
  std::string s;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k) s += 'x';
    s += std::to_string(dims[k]);
  }
  return s;
}

/// Order-K dense array. Values are linearized first-index-fastest, so element
/// (i_0, ..., i_{K-1}) lives at i_0 + I_0 * (i_1 + I_1 * (i_2 + ...)).
template <typename Scalar>
class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(Dims dims) : dims_(std::move(dims)) {
    validate_dims();
    values_ = VectorX<Scalar>::Zero(product(dims_));
  }

  DenseTensor(Dims dims, VectorX<Scalar> values) : dims_(std::move(dims)), values_(std::move(values)) {
    validate_dims();
    if (values_.size() != product(dims_))
      throw InvalidArgument("tensor of dims " + dims_string(dims_) + " needs " +
                            std::to_string(product(dims_)) + " values, got " +
                            std::to_string(values_.size()));
  }

  int order() const { return static_cast<int>(dims_.size()); }
  const Dims& dims() const { return dims_; }
  Index dim(int k) const { return dims_.at(static_cast<std::size_t>(k)); }
  Index size() const { return values_.size(); }

  const VectorX<Scalar>& values() const { return values_; }
  VectorX<Scalar>& values() { return values_; }

  Index linear_index(std::span<const Index> idx) const {
    if (idx.size() != dims_.size()) throw InvalidArgument("index arity does not match tensor order");
    Index lin = 0;
    for (std::size_t k = idx.size(); k-- > 0;) {
      if (idx[k] < 0 || idx[k] >= dims_[k]) throw InvalidArgument("tensor index out of range");
      lin = lin * dims_[k] + idx[k];
    }
    return lin;
  }

  Scalar operator()(std::span<const Index> idx) const { return values_[linear_index(idx)]; }
  Scalar& operator()(std::span<const Index> idx) { return values_[linear_index(idx)]; }

  template <std::integral... I>
    requires(sizeof...(I) > 0)
  Scalar operator()(I... i) const {
    const Index idx[] = {static_cast<Index>(i)...};
    return (*this)(std::span<const Index>(idx));
  }

  template <std::integral... I>
    requires(sizeof...(I) > 0)
  Scalar& operator()(I... i) {
    const Index idx[] = {static_cast<Index>(i)...};
    return (*this)(std::span<const Index>(idx));
  }

  friend bool operator==(const DenseTensor& a, const DenseTensor& b) {
    return a.dims_ == b.dims_ && a.values_ == b.values_;
  }

 private:
  void validate_dims() const {
    if (dims_.empty()) throw InvalidArgument("tensor order must be at least 1");
    for (Index d : dims_)
      if (d < 1) throw InvalidArgument("tensor dims must be positive, got " + dims_string(dims_));
  }

  Dims dims_;
  VectorX<Scalar> values_;
};

using Tensor = DenseTensor<double>;

namespace detail {

// Sizes of the modes before `mode`, the mode itself, and the modes after it.
struct ModeSplit {
  Index left;
  Index extent;
  Index right;
};

inline ModeSplit split_at(const Dims& dims, int mode) {
  if (mode < 0 || mode >= static_cast<int>(dims.size()))
    throw InvalidArgument("mode " + std::to_string(mode) + " out of range for order-" +
                          std::to_string(dims.size()) + " tensor");
  const auto m = static_cast<std::size_t>(mode);
  std::span<const Index> all(dims);
  return {product(all.first(m)), dims[m], product(all.subspan(m + 1))};
}

}  // namespace detail

/// Mode-n unfolding X_(n): I_n rows, remaining modes enumerate columns with the
/// lowest remaining mode varying fastest.
template <typename Scalar>
MatrixX<Scalar> matricize(const DenseTensor<Scalar>& t, int mode) {
  const auto [left, extent, right] = detail::split_at(t.dims(), mode);
  MatrixX<Scalar> m(extent, left * right);
  const Scalar* src = t.values().data();
  for (Index b = 0; b < right; ++b)
    for (Index i = 0; i < extent; ++i)
      for (Index a = 0; a < left; ++a) m(i, a + left * b) = *src++;
  return m;
}

/// Inverse of matricize.
template <typename Derived>
DenseTensor<typename Derived::Scalar> fold(const Eigen::MatrixBase<Derived>& expr, int mode, Dims dims) {
  using Scalar = typename Derived::Scalar;
  // Evaluates product expressions once instead of per coefficient.
  const Eigen::Ref<const MatrixX<Scalar>> m(expr);
  const auto [left, extent, right] = detail::split_at(dims, mode);
  if (m.rows() != extent || m.cols() != left * right)
    throw InvalidArgument("cannot fold a " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                          " matrix along mode " + std::to_string(mode) + " into " + dims_string(dims));
  DenseTensor<Scalar> t(std::move(dims));
  Scalar* dst = t.values().data();
  for (Index b = 0; b < right; ++b)
    for (Index i = 0; i < extent; ++i)
      for (Index a = 0; a < left; ++a) *dst++ = m(i, a + left * b);
  return t;
}

/// Column-wise Kronecker product. In a (x) b the index of b varies fastest, so
/// khatri_rao({A3, A2, A1}) matches the column order of matricize(., 3) for a
/// tensor whose first three modes have factors A1, A2, A3.
template <typename Scalar>
MatrixX<Scalar> khatri_rao(const std::vector<MatrixX<Scalar>>& mats) {
  if (mats.empty()) throw InvalidArgument("khatri_rao needs at least one matrix");
  const Index rank = mats.front().cols();
  Index rows = 1;
  for (const auto& m : mats) {
    if (m.cols() != rank) throw InvalidArgument("khatri_rao inputs must share a column count");
    rows *= m.rows();
  }
  MatrixX<Scalar> out(rows, rank);
  VectorX<Scalar> acc, next;
  for (Index r = 0; r < rank; ++r) {
    acc = mats.front().col(r);
    for (std::size_t k = 1; k < mats.size(); ++k) {
      const auto& b = mats[k];
      next.resize(acc.size() * b.rows());
      for (Index i = 0; i < acc.size(); ++i) next.segment(i * b.rows(), b.rows()) = acc[i] * b.col(r);
      acc.swap(next);
    }
    out.col(r) = acc;
  }
  return out;
}

namespace detail {

/// Visits the CP reconstruction in contiguous blocks. The leading modes form a
/// Khatri-Rao "head" and the trailing (at most two) modes are enumerated, so the
/// memory cost is the head size times R instead of the full tensor times R.
/// f(offset, block) receives the values for linear indices [offset, offset + block.size()).
template <typename Scalar, typename F>
void for_each_cp_block(const VectorX<Scalar>& lambda, const std::vector<MatrixX<Scalar>>& factors, F&& f) {
  if (factors.empty()) throw InvalidArgument("CP model needs at least one factor");
  for (const auto& a : factors)
    if (a.cols() != lambda.size())
      throw InvalidArgument("CP factor has " + std::to_string(a.cols()) + " columns but rank is " +
                            std::to_string(lambda.size()));
  const int order = static_cast<int>(factors.size());
  const int split = order > 2 ? order - 2 : 1;

  std::vector<MatrixX<Scalar>> head_mats;
  for (int k = split - 1; k >= 0; --k) head_mats.push_back(factors[static_cast<std::size_t>(k)]);
  const MatrixX<Scalar> head = khatri_rao(head_mats);

  Index tail_count = 1;
  for (int k = split; k < order; ++k) tail_count *= factors[static_cast<std::size_t>(k)].rows();

  std::vector<Index> counter(static_cast<std::size_t>(order - split), 0);
  VectorX<Scalar> w(lambda.size());
  VectorX<Scalar> block(head.rows());
  for (Index t = 0; t < tail_count; ++t) {
    w = lambda;
    for (int k = split; k < order; ++k)
      w.array() *= factors[static_cast<std::size_t>(k)].row(counter[static_cast<std::size_t>(k - split)]).transpose().array();
    block.noalias() = head * w;
    f(t * head.rows(), std::as_const(block));
    for (std::size_t c = 0; c < counter.size(); ++c) {
      if (++counter[c] < factors[static_cast<std::size_t>(split) + c].rows()) break;
      counter[c] = 0;
    }
  }
}

}  // namespace detail

/// Sum of R rank-one tensors: x(i_0..i_{K-1}) = sum_r lambda_r prod_k A_k(i_k, r).
template <typename Scalar>
DenseTensor<Scalar> reconstruct_cp(const VectorX<Scalar>& lambda, const std::vector<MatrixX<Scalar>>& factors) {
  if (factors.empty()) throw InvalidArgument("CP model needs at least one factor");
  Dims dims;
  for (const auto& a : factors) dims.push_back(a.rows());
  DenseTensor<Scalar> t(std::move(dims));
  detail::for_each_cp_block(lambda, factors, [&](Index offset, const VectorX<Scalar>& block) {
    t.values().segment(offset, block.size()) = block;
  });
  return t;
}

template <typename Scalar>
Scalar frobenius_norm(const DenseTensor<Scalar>& t) {
  return t.values().norm();
}

/// Keeps the listed slices of the last mode, in the given order.
template <typename Scalar>
DenseTensor<Scalar> select_last_mode(const DenseTensor<Scalar>& t, std::span<const Index> keep) {
  Dims dims = t.dims();
  const Index last = dims.back();
  const Index slice = t.size() / last;
  dims.back() = static_cast<Index>(keep.size());
  if (keep.empty()) throw InvalidArgument("select_last_mode needs at least one index");
  DenseTensor<Scalar> out(std::move(dims));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j] < 0 || keep[j] >= last) throw InvalidArgument("last-mode index out of range");
    out.values().segment(static_cast<Index>(j) * slice, slice) = t.values().segment(keep[j] * slice, slice);
  }
  return out;
}

/// Stacks equally shaped tensors along a new trailing mode.
template <typename Scalar>
DenseTensor<Scalar> stack(const std::vector<DenseTensor<Scalar>>& parts) {
  if (parts.empty()) throw InvalidArgument("nothing to stack");
  Dims dims = parts.front().dims();
  const Index slice = parts.front().size();
  dims.push_back(static_cast<Index>(parts.size()));
  DenseTensor<Scalar> out(std::move(dims));
  for (std::size_t j = 0; j < parts.size(); ++j) {
    if (parts[j].dims() != parts.front().dims())
      throw InvalidArgument("cannot stack tensors of dims " + dims_string(parts.front().dims()) + " and " +
                            dims_string(parts[j].dims()));
    out.values().segment(static_cast<Index>(j) * slice, slice) = parts[j].values();
  }
  return out;
}

}  // namespace cpfos
