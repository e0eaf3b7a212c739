#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ddcnet/blocks.hpp"
#include "ddcnet/parameters.hpp"

namespace ddcnet {

// DRM followed by the content block (CRM, or an RDB in the CRM ablation).
template <typename Scalar>
class Stage {
 public:
  struct Cache {
    typename Drm<Scalar>::Cache drm;
    typename Crm<Scalar>::Cache crm;
    typename Rdb<Scalar>::Cache rdb;
  };

  Stage() = default;
  Stage(ParameterStore<Scalar>& store, const std::string& name, Index channels,
        const NetConfig& cfg);

  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& x, Cache* cache,
                             InverseResidue* residue) const;
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dy, const Cache& cache) const;

 private:
  ContentBlock kind_ = ContentBlock::Crm;
  Drm<Scalar> drm_;
  Crm<Scalar> crm_;
  Rdb<Scalar> rdb_;
};

// Three-scale encoder/decoder. Encoder stage s runs DRM->CRM at width
// C0*2^s and downsamples with a stride-2 4x4 conv; the bottleneck runs at
// 8*C0; decoder stages upsample with a 2x2 transposed conv, concatenate the
// encoder skip, merge with a 1x1 conv and run DRM->CRM.
//
// The network binds to the tensors of a ParameterStore, which must outlive it
// and must not be copied while bound.
template <typename Scalar>
class Network {
 public:
  static constexpr int kScales = 3;

  struct Tape {
    FeatureMap<Scalar> image;
    std::array<typename Stage<Scalar>::Cache, kScales> enc;
    typename Stage<Scalar>::Cache mid;
    std::array<typename Stage<Scalar>::Cache, kScales> dec;
    std::array<FeatureMap<Scalar>, kScales> skip;
    std::array<FeatureMap<Scalar>, kScales> up_in;
    std::array<FeatureMap<Scalar>, kScales> merge_in;
    FeatureMap<Scalar> head_in;
  };

  // Stage inputs keyed by layer name: enc0..enc2, mid, dec2..dec0.
  using Taps = std::map<std::string, FeatureMap<Scalar>>;

  explicit Network(ParameterStore<Scalar>& store);

  // img is (N, H, W, 3) with H and W divisible by 8.
  FeatureMap<Scalar> forward(const FeatureMap<Scalar>& img, Tape* tape = nullptr,
                             Taps* taps = nullptr, InverseResidue* residue = nullptr) const;

  // Accumulates parameter gradients; returns the gradient w.r.t. the image.
  FeatureMap<Scalar> backward(const FeatureMap<Scalar>& dout, const Tape& tape) const;

  const NetConfig& config() const { return config_; }

  static std::vector<std::string> layer_names();

 private:
  NetConfig config_;
  Conv2d<Scalar> stem_;
  std::array<Stage<Scalar>, kScales> enc_;
  std::array<Conv2d<Scalar>, kScales> down_;
  Stage<Scalar> mid_;
  std::array<ConvTranspose2x2<Scalar>, kScales> up_;
  std::array<Conv2d<Scalar>, kScales> merge_;
  std::array<Stage<Scalar>, kScales> dec_;
  Conv2d<Scalar> head_;
};

// Fresh, Kaiming-initialised parameters for cfg.
template <typename Scalar>
ParameterStore<Scalar> build_model(const NetConfig& cfg, std::uint64_t seed);

// Convenience one-shot inference.
template <typename Scalar>
FeatureMap<Scalar> forward(ParameterStore<Scalar>& store, const FeatureMap<Scalar>& img);

}  // namespace ddcnet
