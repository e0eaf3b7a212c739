#include "ddcnet/blocks.hpp"

#include <algorithm>
#include <cmath>

namespace ddcnet {
namespace {

template <typename Scalar>
using Matrix = typename Tensor<Scalar>::Matrix;

// Spatial mean of every (batch, channel) plane: (N,H,W,C) -> N x C.
template <typename Scalar>
Matrix<Scalar> spatial_mean(const Tensor<Scalar>& t) {
  const Index hw = t.h() * t.w();
  Matrix<Scalar> out(t.n(), t.c());
  const auto m = t.matrix();
  for (Index b = 0; b < t.n(); ++b) out.row(b) = m.middleRows(b * hw, hw).colwise().mean();
  return out;
}

// Re(ifft2(coef[b, c] * S / |S|)), the input gradient of sum(coef * |fft2(x)|)
// when coef is constant over each plane. Zero-amplitude bins contribute 0.
template <typename Scalar>
Tensor<Scalar> amplitude_pullback(const Spectrum<Scalar>& s, const Tensor<Scalar>& amp,
                                  const Matrix<Scalar>& coef) {
  Spectrum<Scalar> g(s.dims());
  const Index hw = amp.h() * amp.w();
  const Index c = amp.c();
  for (Index b = 0; b < amp.n(); ++b) {
    for (Index p = 0; p < hw; ++p) {
      const Index row = (b * hw + p) * c;
      for (Index ch = 0; ch < c; ++ch) {
        const Scalar a = amp.data()[row + ch];
        if (a > Scalar(0)) {
          const Scalar k = coef(b, ch) / a;
          g.real.data()[row + ch] = k * s.real.data()[row + ch];
          g.imag.data()[row + ch] = k * s.imag.data()[row + ch];
        }
      }
    }
  }
  return ifft2(g);
}

template <typename Scalar>
Tensor<Scalar> scale_channels(const Tensor<Scalar>& x, const Matrix<Scalar>& gate) {
  Tensor<Scalar> y(x.dims());
  const Index hw = x.h() * x.w();
  for (Index b = 0; b < x.n(); ++b) {
    y.matrix().middleRows(b * hw, hw).array() =
        x.matrix().middleRows(b * hw, hw).array().rowwise() * gate.row(b).array();
  }
  return y;
}

template <typename Scalar>
void add_broadcast_channels(Tensor<Scalar>& dst, const Tensor<Scalar>& single, Scalar scale) {
  dst.matrix().colwise() += single.matrix().col(0) * scale;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> degradation_amplitude(const FeatureMap<Scalar>& x) {
  require_rank4(x.dims(), "degradation_amplitude");
  Tensor<Scalar> a = amplitude(fft2(x));
  const Tensor<Scalar> a_ci = amplitude(fft2(channel_mean(x)));
  a.matrix().colwise() -= a_ci.matrix().col(0);
  return a;
}

// ---------------------------------------------------------------------------
// Drm

template <typename Scalar>
Drm<Scalar>::Drm(ParameterStore<Scalar>& store, const std::string& name, Index channels,
                 DrmOptions opts)
    : channels_(channels), opts_(opts) {
  if (channels < 1 || opts.reduction < 1) throw ConfigError("Drm '" + name + "': invalid config");
  if (opts.amplitude_guidance) {
    const Index hidden = std::max<Index>(1, channels / opts.reduction);
    fc1_ = Linear<Scalar>(store, name + ".fc1", channels, hidden);
    fc2_ = Linear<Scalar>(store, name + ".fc2", hidden, channels);
  }
}

template <typename Scalar>
FeatureMap<Scalar> Drm<Scalar>::forward(const FeatureMap<Scalar>& x, Cache* cache) const {
  require_rank4(x.dims(), "Drm");
  if (x.c() != channels_) {
    throw ShapeError("Drm: expected " + std::to_string(channels_) + " channels, got " +
                     x.shape_string());
  }
  if (!opts_.amplitude_guidance) {
    if (cache) cache->x = x;
    return x;
  }
  Cache local;
  Cache& c = cache ? *cache : local;
  c.x = x;
  c.spectrum = fft2(x);
  c.amp = amplitude(c.spectrum);
  Tensor<Scalar> a_deg = c.amp;
  if (opts_.subtract_mean_amplitude) {
    c.mean_spectrum = fft2(channel_mean(x));
    c.mean_amp = amplitude(c.mean_spectrum);
    a_deg.matrix().colwise() -= c.mean_amp.matrix().col(0);
  }
  c.pooled = spatial_mean(a_deg);
  c.hidden_pre = fc1_.forward(c.pooled);
  c.hidden = c.hidden_pre.cwiseMax(Scalar(0));
  const Matrix z = fc2_.forward(c.hidden);
  c.gate = (Scalar(1) + (-z.array()).exp()).inverse().matrix();
  return scale_channels(x, c.gate);
}

template <typename Scalar>
typename Drm<Scalar>::Matrix Drm<Scalar>::gate(const FeatureMap<Scalar>& x) const {
  if (!opts_.amplitude_guidance) return Matrix::Ones(x.n(), channels_);
  Cache c;
  forward(x, &c);
  return c.gate;
}

template <typename Scalar>
FeatureMap<Scalar> Drm<Scalar>::backward(const FeatureMap<Scalar>& dy, const Cache& c) const {
  require_same_shape(dy, c.x, "Drm::backward");
  if (!opts_.amplitude_guidance) return dy;
  const Index hw = dy.h() * dy.w();
  Matrix dgate(dy.n(), channels_);
  for (Index b = 0; b < dy.n(); ++b) {
    dgate.row(b) = (dy.matrix().middleRows(b * hw, hw).array() *
                    c.x.matrix().middleRows(b * hw, hw).array())
                       .colwise()
                       .sum();
  }
  Tensor<Scalar> dx = scale_channels(dy, c.gate);

  const Matrix dz = (dgate.array() * c.gate.array() * (Scalar(1) - c.gate.array())).matrix();
  const Matrix dhidden = fc2_.backward(c.hidden, dz);
  const Matrix dhidden_pre =
      (c.hidden_pre.array() > Scalar(0)).select(dhidden.array(), Scalar(0)).matrix();
  const Matrix dpooled = fc1_.backward(c.pooled, dhidden_pre);

  const Matrix coef = dpooled / static_cast<Scalar>(hw);
  dx.values() += amplitude_pullback(c.spectrum, c.amp, coef).values();
  if (opts_.subtract_mean_amplitude) {
    const Matrix mean_coef = -coef.rowwise().sum();
    const Tensor<Scalar> dmean = amplitude_pullback(c.mean_spectrum, c.mean_amp, mean_coef);
    add_broadcast_channels(dx, dmean, Scalar(1) / static_cast<Scalar>(channels_));
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Clc

template <typename Scalar>
Clc<Scalar>::Clc(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out)
    : first_(store, name + ".conv1", in, out, 3), second_(store, name + ".conv2", out, out, 3) {}

template <typename Scalar>
Tensor<Scalar> Clc<Scalar>::forward(const Tensor<Scalar>& x, Cache* cache) const {
  Tensor<Scalar> pre = first_.forward(x);
  Tensor<Scalar> mid = leaky_relu(pre);
  Tensor<Scalar> y = second_.forward(mid);
  if (cache) {
    cache->x = x;
    cache->mid_pre = std::move(pre);
    cache->mid = std::move(mid);
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> Clc<Scalar>::backward(const Tensor<Scalar>& dy, const Cache& c) const {
  const Tensor<Scalar> dmid = second_.backward(c.mid, dy);
  return first_.backward(c.x, leaky_relu_backward(c.mid_pre, dmid));
}

// ---------------------------------------------------------------------------
// Rdb

template <typename Scalar>
Rdb<Scalar>::Rdb(ParameterStore<Scalar>& store, const std::string& name, Index channels,
                 int depth)
    : channels_(channels), growth_(std::max<Index>(1, channels / 2)) {
  if (channels < 1 || depth < 1) throw ConfigError("Rdb '" + name + "': invalid config");
  for (int k = 0; k < depth; ++k) {
    dense_.emplace_back(store, name + ".dense" + std::to_string(k), channels + k * growth_,
                        growth_, 3);
  }
  fuse_ = Conv2d<Scalar>(store, name + ".fuse", channels + depth * growth_, channels, 1);
}

template <typename Scalar>
FeatureMap<Scalar> Rdb<Scalar>::forward(const FeatureMap<Scalar>& x, Cache* cache) const {
  require_rank4(x.dims(), "Rdb");
  if (x.c() != channels_) throw ShapeError("Rdb: channel mismatch " + x.shape_string());
  Tensor<Scalar> stack = x;
  std::vector<Tensor<Scalar>> pre_act;
  for (const auto& conv : dense_) {
    Tensor<Scalar> pre = conv.forward(stack);
    stack = concat_channels(stack, leaky_relu(pre));
    if (cache) pre_act.push_back(std::move(pre));
  }
  Tensor<Scalar> y = fuse_.forward(stack);
  y.values() += x.values();
  if (cache) {
    cache->stack = std::move(stack);
    cache->pre_act = std::move(pre_act);
  }
  return y;
}

template <typename Scalar>
FeatureMap<Scalar> Rdb<Scalar>::backward(const FeatureMap<Scalar>& dy, const Cache& c) const {
  Tensor<Scalar> dstack = fuse_.backward(c.stack, dy);
  for (Index k = static_cast<Index>(dense_.size()) - 1; k >= 0; --k) {
    const Index in = channels_ + k * growth_;
    const Tensor<Scalar> dout = slice_channels(dstack, in, growth_);
    const Tensor<Scalar> dpre = leaky_relu_backward(c.pre_act[static_cast<std::size_t>(k)], dout);
    const Tensor<Scalar> din =
        dense_[static_cast<std::size_t>(k)].backward(slice_channels(c.stack, 0, in), dpre);
    dstack.matrix().leftCols(in) += din.matrix();
  }
  Tensor<Scalar> dx = slice_channels(dstack, 0, channels_);
  dx.values() += dy.values();
  return dx;
}

// ---------------------------------------------------------------------------
// Crm

template <typename Scalar>
Crm<Scalar>::Crm(ParameterStore<Scalar>& store, const std::string& name, Index channels,
                 int rdb_depth)
    : channels_(channels),
      clc_{Clc<Scalar>(store, name + ".clc11", 1, channels),
           Clc<Scalar>(store, name + ".clc12", 1, channels),
           Clc<Scalar>(store, name + ".clc21", 1, channels),
           Clc<Scalar>(store, name + ".clc22", 1, channels)},
      f1_(store, name + ".f1", 2 * channels, channels, 3),
      f2_(store, name + ".f2", 2 * channels, channels, 3),
      rdb_(store, name + ".rdb", channels, rdb_depth),
      fuse_(store, name + ".fuse", 2 * channels, channels, 1) {}

template <typename Scalar>
FeatureMap<Scalar> Crm<Scalar>::forward(const FeatureMap<Scalar>& x, Cache* cache,
                                        InverseResidue* residue) const {
  require_rank4(x.dims(), "Crm");
  if (x.c() != channels_) throw ShapeError("Crm: channel mismatch " + x.shape_string());
  Cache local;
  Cache& c = cache ? *cache : local;
  c.x = x;
  // The channel mean of the per-channel spectra equals the spectrum of the
  // channel mean, which costs one transform instead of C.
  Spectrum<Scalar> s = fft2(channel_mean(x));
  c.re = std::move(s.real);
  c.im = std::move(s.imag);
  c.real_cat = concat_channels(clc_[0].forward(c.re, &c.clc[0]), clc_[1].forward(c.im, &c.clc[1]));
  c.imag_cat = concat_channels(clc_[2].forward(c.re, &c.clc[2]), clc_[3].forward(c.im, &c.clc[3]));
  c.global = ifft2(Spectrum<Scalar>(f1_.forward(c.real_cat), f2_.forward(c.imag_cat)), residue);
  const Tensor<Scalar> local_branch = rdb_.forward(x, &c.rdb);
  c.fused_in = concat_channels(c.global, local_branch);
  return fuse_.forward(c.fused_in);
}

template <typename Scalar>
FeatureMap<Scalar> Crm<Scalar>::global_branch(const FeatureMap<Scalar>& x) const {
  Cache c;
  forward(x, &c);
  return c.global;
}

template <typename Scalar>
FeatureMap<Scalar> Crm<Scalar>::backward(const FeatureMap<Scalar>& dy, const Cache& c) const {
  require_same_shape(dy, c.x, "Crm::backward");
  const Tensor<Scalar> dcat = fuse_.backward(c.fused_in, dy);
  // Adjoint of x -> Re(ifft2(r + i*m)) is fft2 split into (real, imag).
  const Spectrum<Scalar> ds = fft2(slice_channels(dcat, 0, channels_));
  const Tensor<Scalar> dreal_cat = f1_.backward(c.real_cat, ds.real);
  const Tensor<Scalar> dimag_cat = f2_.backward(c.imag_cat, ds.imag);

  Tensor<Scalar> dre = clc_[0].backward(slice_channels(dreal_cat, 0, channels_), c.clc[0]);
  dre.values() += clc_[2].backward(slice_channels(dimag_cat, 0, channels_), c.clc[2]).values();
  Tensor<Scalar> dim = clc_[1].backward(slice_channels(dreal_cat, channels_, channels_), c.clc[1]);
  dim.values() +=
      clc_[3].backward(slice_channels(dimag_cat, channels_, channels_), c.clc[3]).values();
  // Adjoint of m -> (Re fft2(m), Im fft2(m)) is Re(ifft2(dre + i*dim)).
  const Tensor<Scalar> dmean = ifft2(Spectrum<Scalar>(std::move(dre), std::move(dim)));

  Tensor<Scalar> dx = rdb_.backward(slice_channels(dcat, channels_, channels_), c.rdb);
  add_broadcast_channels(dx, dmean, Scalar(1) / static_cast<Scalar>(channels_));
  return dx;
}

template Tensor<float> degradation_amplitude<float>(const FeatureMap<float>&);
template Tensor<double> degradation_amplitude<double>(const FeatureMap<double>&);
template class Drm<float>;
template class Drm<double>;
template class Clc<float>;
template class Clc<double>;
template class Rdb<float>;
template class Rdb<double>;
template class Crm<float>;
template class Crm<double>;

}  // namespace ddcnet
