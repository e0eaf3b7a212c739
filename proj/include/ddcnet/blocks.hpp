#pragma once

#include <array>
#include <string>
#include <vector>

#include "ddcnet/layers.hpp"
#include "ddcnet/spectral.hpp"

namespace ddcnet {

// Amplitude of the per-channel spectrum minus the amplitude of the
// channel-mean spectrum, broadcast over channels. Exactly zero when every
// channel of x is identical.
template <typename Scalar>
Tensor<Scalar> degradation_amplitude(const FeatureMap<Scalar>& x);

struct DrmOptions {
  int reduction = 4;
  bool amplitude_guidance = true;
  bool subtract_mean_amplitude = true;
};

// Degradation removal module: gates each channel by a sigmoid vector
// computed from the global average of the channel-dependent Fourier
// amplitude. The output is always a per-channel rescaling of the input.
template <typename Scalar>
class Drm {
 public:
  using Matrix = typename Tensor<Scalar>::Matrix;

  struct Cache {
    Tensor<Scalar> x;
    Spectrum<Scalar> spectrum;
    Tensor<Scalar> amp;
    Spectrum<Scalar> mean_spectrum;
    Tensor<Scalar> mean_amp;
    Matrix pooled;
    Matrix hidden_pre;
    Matrix hidden;
    Matrix gate;
  };

  Drm() = default;
  Drm(ParameterStore<Scalar>& store, const std::string& name, Index channels, DrmOptions opts);

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, Cache* cache = nullptr) const;
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy, const Cache& cache) const;

  // The (N, C) gate applied to x; all ones with amplitude guidance off.
  Matrix gate(const FeatureMap<Scalar>& x) const;

 private:
  Index channels_ = 0;
  DrmOptions opts_;
  Linear<Scalar> fc1_;
  Linear<Scalar> fc2_;
};

// conv3x3 -> LeakyReLU -> conv3x3.
template <typename Scalar>
class Clc {
 public:
  struct Cache {
    Tensor<Scalar> x;
    Tensor<Scalar> mid_pre;
    Tensor<Scalar> mid;
  };

  Clc() = default;
  Clc(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out);

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache* cache = nullptr) const;
  Tensor<Scalar> backward(const Tensor<Scalar>& dy, const Cache& cache) const;

 private:
  Conv2d<Scalar> first_;
  Conv2d<Scalar> second_;
};

// Residual dense block: layer k sees the input and every earlier layer's
// output, a 1x1 conv fuses the stack back to C channels, and the input is
// added back.
template <typename Scalar>
class Rdb {
 public:
  struct Cache {
    Tensor<Scalar> stack;                 // (N, H, W, C + depth * growth)
    std::vector<Tensor<Scalar>> pre_act;  // per dense layer
  };

  Rdb() = default;
  Rdb(ParameterStore<Scalar>& store, const std::string& name, Index channels, int depth);

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, Cache* cache = nullptr) const;
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy, const Cache& cache) const;

  Index growth() const { return growth_; }

 private:
  Index channels_ = 0;
  Index growth_ = 0;
  std::vector<Conv2d<Scalar>> dense_;
  Conv2d<Scalar> fuse_;
};

// Content reconstruction module. Global branch: the channel-mean spectrum
// is split into real and imaginary maps, cross-mixed by four CLC blocks and
// two 3x3 fusions into C-channel real/imag maps, then inverse transformed.
// Local branch: an RDB. A 1x1 conv fuses both branches.
template <typename Scalar>
class Crm {
 public:
  struct Cache {
    Tensor<Scalar> x;
    Tensor<Scalar> re, im;                     // (N, H, W, 1)
    std::array<typename Clc<Scalar>::Cache, 4> clc;
    Tensor<Scalar> real_cat, imag_cat;         // inputs to f1 / f2
    Tensor<Scalar> global;                     // X_tmp
    typename Rdb<Scalar>::Cache rdb;
    Tensor<Scalar> fused_in;                   // concat(global, local)
  };

  Crm() = default;
  Crm(ParameterStore<Scalar>& store, const std::string& name, Index channels, int rdb_depth);

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, Cache* cache = nullptr,
                             InverseResidue* residue = nullptr) const;
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy, const Cache& cache) const;

  // Output of the Fourier branch alone.
  FeatureMap<Scalar> global_branch(const FeatureMap<Scalar>& x) const;

 private:
  Index channels_ = 0;
  // clc_[0] = real->f1, clc_[1] = imag->f1, clc_[2] = real->f2, clc_[3] = imag->f2
  std::array<Clc<Scalar>, 4> clc_;
  Conv2d<Scalar> f1_;
  Conv2d<Scalar> f2_;
  Rdb<Scalar> rdb_;
  Conv2d<Scalar> fuse_;
};

}  // namespace ddcnet
