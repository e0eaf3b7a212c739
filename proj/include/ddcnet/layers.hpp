#pragma once

#include <string>

#include "ddcnet/parameters.hpp"
#include "ddcnet/tensor.hpp"

namespace ddcnet {

inline constexpr double kLeakySlope = 0.2;

// Layers hold pointers into a ParameterStore; the store must outlive them.
// forward() is const and side-effect free. backward() takes the forward
// input again, accumulates into the bound gradients and returns d(input).

template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  // pad < 0 selects "same" padding for odd kernels.
  Conv2d(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out,
         Index kernel, Index stride = 1, Index pad = -1, Init weight_init = Init::KaimingNormal);

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const;
  Tensor<Scalar> backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy) const;

  Index in_channels() const { return in_; }
  Index out_channels() const { return out_; }

 private:
  Index out_size(Index len) const { return (len + 2 * pad_ - kernel_) / stride_ + 1; }
  void check_input(const Tensor<Scalar>& x) const;

  typename ParameterStore<Scalar>::Entry* weight_ = nullptr;  // (k, k, in, out)
  typename ParameterStore<Scalar>::Entry* bias_ = nullptr;    // (out)
  Index in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
};

// Stride-2, 2x2 transposed convolution: every input pixel expands into a
// 2x2 output block, doubling H and W.
template <typename Scalar>
class ConvTranspose2x2 {
 public:
  ConvTranspose2x2() = default;
  ConvTranspose2x2(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out);

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const;
  Tensor<Scalar> backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy) const;

 private:
  typename ParameterStore<Scalar>::Entry* weight_ = nullptr;  // (in, 2, 2, out)
  typename ParameterStore<Scalar>::Entry* bias_ = nullptr;
  Index in_ = 0, out_ = 0;
};

// Dense layer on row vectors: y = x W + b.
template <typename Scalar>
class Linear {
 public:
  using Matrix = typename Tensor<Scalar>::Matrix;

  Linear() = default;
  Linear(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out);

  Matrix forward(const Matrix& x) const;
  Matrix backward(const Matrix& x, const Matrix& dy) const;

 private:
  typename ParameterStore<Scalar>::Entry* weight_ = nullptr;  // (in, out)
  typename ParameterStore<Scalar>::Entry* bias_ = nullptr;
  Index in_ = 0, out_ = 0;
};

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> y = x;
  // both products computed so gcc can emit a blend
  Scalar* p = y.data();
  const Scalar slope = Scalar(kLeakySlope);
  for (Index i = 0, n = y.size(); i < n; ++i) {
    const Scalar v = p[i], s = slope * v;
    p[i] = v > Scalar(0) ? v : s;
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> leaky_relu_backward(const Tensor<Scalar>& pre, const Tensor<Scalar>& dy) {
  Tensor<Scalar> dx = dy;
  Scalar* d = dx.data();
  const Scalar* q = pre.data();
  const Scalar slope = Scalar(kLeakySlope);
  for (Index i = 0, n = dx.size(); i < n; ++i) {
    const Scalar v = d[i], s = slope * v;
    d[i] = q[i] > Scalar(0) ? v : s;
  }
  return dx;
}

}  // namespace ddcnet
