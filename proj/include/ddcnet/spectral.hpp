#pragma once

#include <utility>

#include "ddcnet/tensor.hpp"

namespace ddcnet {

// Full-size complex spectrum of a feature map, same NHWC indexing as the
// spatial tensor it came from. Transforms are orthonormal in both
// directions (1/sqrt(HW)), so Parseval holds exactly.
template <typename Scalar>
struct Spectrum {
  Tensor<Scalar> real;
  Tensor<Scalar> imag;

  Spectrum() = default;
  Spectrum(Tensor<Scalar> re, Tensor<Scalar> im) : real(std::move(re)), imag(std::move(im)) {
    require_same_shape(real, imag, "Spectrum");
  }
  explicit Spectrum(const std::vector<Index>& dims) : real(dims), imag(dims) {}

  const std::vector<Index>& dims() const { return real.dims(); }
};

// Polar form of a spectrum. Phase lies in (-pi, pi]; zero bins carry phase 0.
template <typename Scalar>
struct AmpPhase {
  Tensor<Scalar> amplitude;
  Tensor<Scalar> phase;
};

enum class FftDirection { Forward, Inverse };

// Running record of what ifft2 discarded.
struct InverseResidue {
  double max_imag = 0.0;
  long calls = 0;
};

// Orthonormal 2-D DFT over (H, W) of every (batch, channel) plane.
// Throws NumericError on non-finite input.
template <typename Scalar>
Spectrum<Scalar> fft2(const FeatureMap<Scalar>& x);

// Real part of the orthonormal inverse transform. The magnitude of the
// discarded imaginary part is folded into `residue` when given.
template <typename Scalar>
FeatureMap<Scalar> ifft2(const Spectrum<Scalar>& s, InverseResidue* residue = nullptr);

// Complex-to-complex orthonormal transform in either direction.
template <typename Scalar>
Spectrum<Scalar> transform(const Spectrum<Scalar>& s, FftDirection direction);

template <typename Scalar>
Tensor<Scalar> amplitude(const Spectrum<Scalar>& s);

template <typename Scalar>
AmpPhase<Scalar> decompose(const Spectrum<Scalar>& s);

// Throws DataError if any amplitude is negative.
template <typename Scalar>
Spectrum<Scalar> recombine(const AmpPhase<Scalar>& ap);

// Returns (amplitude of b with phase of a, amplitude of a with phase of b).
// Outputs are unclamped; clamp with clamp_unit() for display.
template <typename Scalar>
std::pair<FeatureMap<Scalar>, FeatureMap<Scalar>> amplitude_swap(const FeatureMap<Scalar>& a,
                                                                  const FeatureMap<Scalar>& b);

template <typename Scalar>
FeatureMap<Scalar> clamp_unit(const FeatureMap<Scalar>& x) {
  FeatureMap<Scalar> out = x;
  out.values() = out.values().max(Scalar(0)).min(Scalar(1));
  return out;
}

}  // namespace ddcnet
