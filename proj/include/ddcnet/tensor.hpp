#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ddcnet/errors.hpp"

namespace ddcnet {

using Index = std::ptrdiff_t;

// Dense row-major tensor. Feature maps are rank 4 in NHWC order, so the
// channel index is innermost and a feature map viewed as a matrix is
// (N*H*W) x C.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  Tensor() = default;

  explicit Tensor(std::vector<Index> dims, Scalar fill = Scalar(0)) : dims_(std::move(dims)) {
    for (Index d : dims_) {
      if (d < 0) throw ShapeError("negative tensor dimension");
    }
    values_ = Array::Constant(element_count(dims_), fill);
  }

  Tensor(Index n, Index h, Index w, Index c, Scalar fill = Scalar(0))
      : Tensor(std::vector<Index>{n, h, w, c}, fill) {}

  static Index element_count(const std::vector<Index>& dims) {
    return std::accumulate(dims.begin(), dims.end(), Index(1), std::multiplies<>());
  }

  const std::vector<Index>& dims() const { return dims_; }
  Index rank() const { return static_cast<Index>(dims_.size()); }
  Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }

  Index n() const { return dim(0); }
  Index h() const { return dim(1); }
  Index w() const { return dim(2); }
  Index c() const { return dim(3); }
  Index pixels() const { return n() * h() * w(); }

  Index dim(Index i) const {
    if (i >= rank()) throw ShapeError("dimension index out of range for " + shape_string());
    return dims_[static_cast<std::size_t>(i)];
  }

  Array& values() { return values_; }
  const Array& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  // Rows are every index but the last; columns are the last dimension.
  MatrixMap matrix() { return MatrixMap(values_.data(), size() / last_dim(), last_dim()); }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(values_.data(), size() / last_dim(), last_dim());
  }
  MatrixMap matrix(Index rows, Index cols) {
    if (rows * cols != size()) throw ShapeError("matrix view size mismatch");
    return MatrixMap(values_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    if (rows * cols != size()) throw ShapeError("matrix view size mismatch");
    return ConstMatrixMap(values_.data(), rows, cols);
  }

  Scalar& operator()(Index b, Index y, Index x, Index ch) {
    return values_[((b * dims_[1] + y) * dims_[2] + x) * dims_[3] + ch];
  }
  const Scalar& operator()(Index b, Index y, Index x, Index ch) const {
    return values_[((b * dims_[1] + y) * dims_[2] + x) * dims_[3] + ch];
  }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

  void set_zero() { values_.setZero(); }

  std::string shape_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? ", " : "") << dims_[i];
    os << ')';
    return os.str();
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(dims_);
    out.values() = values_.template cast<Other>();
    return out;
  }

 private:
  Index last_dim() const {
    if (dims_.empty() || dims_.back() == 0) throw ShapeError("matrix view of empty tensor");
    return dims_.back();
  }

  std::vector<Index> dims_;
  Array values_;
};

template <typename Scalar>
using FeatureMap = Tensor<Scalar>;

inline void require_rank4(const std::vector<Index>& dims, const char* what) {
  if (dims.size() != 4) throw ShapeError(std::string(what) + ": expected a rank-4 NHWC tensor");
}

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return t.values().isFinite().all();
}

// Concatenate two feature maps along channels.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_rank4(a.dims(), "concat_channels");
  require_rank4(b.dims(), "concat_channels");
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw ShapeError("concat_channels: spatial mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
  Tensor<Scalar> out(a.n(), a.h(), a.w(), a.c() + b.c());
  auto m = out.matrix();
  m.leftCols(a.c()) = a.matrix();
  m.rightCols(b.c()) = b.matrix();
  return out;
}

// Channels [first, first + count) of a feature map.
template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, Index first, Index count) {
  require_rank4(x.dims(), "slice_channels");
  if (first < 0 || first + count > x.c()) throw ShapeError("slice_channels: range out of bounds");
  Tensor<Scalar> out(x.n(), x.h(), x.w(), count);
  out.matrix() = x.matrix().middleCols(first, count);
  return out;
}

// Mean over channels: (N,H,W,C) -> (N,H,W,1). Anchored on channel 0 so a
// map whose channels are all identical has a mean bitwise equal to them.
template <typename Scalar>
Tensor<Scalar> channel_mean(const Tensor<Scalar>& x) {
  require_rank4(x.dims(), "channel_mean");
  Tensor<Scalar> out(x.n(), x.h(), x.w(), 1);
  const auto m = x.matrix();
  out.matrix() =
      m.col(0) + (m.colwise() - m.col(0)).rowwise().sum() / static_cast<Scalar>(x.c());
  return out;
}

}  // namespace ddcnet
