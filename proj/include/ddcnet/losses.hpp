#pragma once

#include "ddcnet/tensor.hpp"

namespace ddcnet {

inline constexpr double kDmEpsilon = 1e-8;

struct LossWeights {
  double mae = 1.0;
  double fft = 1.0;
  double dm = 1.0;

  // Throws ConfigError on negative weights.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

template <typename Scalar>
struct LossBreakdown {
  Scalar mae = 0;
  Scalar fft = 0;
  Scalar dm = 0;
  Scalar total = 0;
};

// Mean absolute error over all elements.
template <typename Scalar>
Scalar mae_loss(const FeatureMap<Scalar>& out, const FeatureMap<Scalar>& gt);
template <typename Scalar>
FeatureMap<Scalar> mae_loss_grad(const FeatureMap<Scalar>& out, const FeatureMap<Scalar>& gt);

// Mean of |Re| and |Im| of fft2(gt) - fft2(out); the denominator counts
// real and imaginary parts separately (2 * N * H * W * C).
template <typename Scalar>
Scalar fft_loss(const FeatureMap<Scalar>& out, const FeatureMap<Scalar>& gt);
template <typename Scalar>
FeatureMap<Scalar> fft_loss_grad(const FeatureMap<Scalar>& out, const FeatureMap<Scalar>& gt);

// Batch mean of 1 - cos(out - inp, gt - inp), cosine taken per image over
// the flattened residual with the norm product floored at kDmEpsilon.
// Images whose target residual is exactly zero contribute 0.
template <typename Scalar>
Scalar dm_loss(const FeatureMap<Scalar>& inp, const FeatureMap<Scalar>& out,
               const FeatureMap<Scalar>& gt);
template <typename Scalar>
FeatureMap<Scalar> dm_loss_grad(const FeatureMap<Scalar>& inp, const FeatureMap<Scalar>& out,
                                const FeatureMap<Scalar>& gt);

// Weighted sum of the three losses. When grad_out is given it receives
// d(total)/d(out).
template <typename Scalar>
LossBreakdown<Scalar> total_loss(const FeatureMap<Scalar>& inp, const FeatureMap<Scalar>& out,
                                 const FeatureMap<Scalar>& gt, const LossWeights& w,
                                 FeatureMap<Scalar>* grad_out = nullptr);

}  // namespace ddcnet
