#include "ddcnet/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

namespace ddcnet {
namespace {

template <typename Scalar>
Eigen::FFT<Scalar>& fft_engine() {
  thread_local Eigen::FFT<Scalar> engine = [] {
    Eigen::FFT<Scalar> e;
    e.SetFlag(Eigen::FFT<Scalar>::Unscaled);
    return e;
  }();
  return engine;
}

bool power_of_two(Index n) { return n > 1 && (n & (n - 1)) == 0; }

template <typename Scalar>
const std::vector<std::complex<Scalar>>& twiddles(Index len, bool forward) {
  thread_local std::map<std::pair<Index, bool>, std::vector<std::complex<Scalar>>> cache;
  auto& tw = cache[{len, forward}];
  if (tw.empty()) {
    const double sign = forward ? -1.0 : 1.0;
    for (Index j = 0; j < len / 2; ++j) {
      const double a = sign * 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(len);
      tw.emplace_back(static_cast<Scalar>(std::cos(a)), static_cast<Scalar>(std::sin(a)));
    }
  }
  return tw;
}

// Radix-2 transform along the middle axis of `count` contiguous (len, width)
// blocks. Each butterfly runs on whole rows of `width` lanes, so every lane
// sees the same sequence of operations whatever the width.
template <typename Scalar>
void radix2_rows(Scalar* re, Scalar* im, Index count, Index len, Index width, bool forward) {
  using Row = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>;
  using Buf = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  const auto& tw = twiddles<Scalar>(len, forward);
  int bits = 0;
  while ((Index(1) << bits) < len) ++bits;
  Buf tr(width), ti(width);
  for (Index blk = 0; blk < count; ++blk) {
    Scalar* br = re + blk * len * width;
    Scalar* bi = im + blk * len * width;
    for (Index i = 0; i < len; ++i) {
      Index r = 0;
      for (int k = 0; k < bits; ++k) r |= ((i >> k) & 1) << (bits - 1 - k);
      if (r > i) {
        std::swap_ranges(br + i * width, br + (i + 1) * width, br + r * width);
        std::swap_ranges(bi + i * width, bi + (i + 1) * width, bi + r * width);
      }
    }
    for (Index half = 1; half < len; half *= 2) {
      const Index step = len / (2 * half);
      for (Index start = 0; start < len; start += 2 * half) {
        for (Index j = 0; j < half; ++j) {
          const Scalar wr = tw[static_cast<std::size_t>(j * step)].real();
          const Scalar wi = tw[static_cast<std::size_t>(j * step)].imag();
          Row ar(br + (start + j) * width, width), ai(bi + (start + j) * width, width);
          Row cr(br + (start + j + half) * width, width), ci(bi + (start + j + half) * width, width);
          tr = cr * wr - ci * wi;
          ti = cr * wi + ci * wr;
          cr = ar - tr;
          ci = ai - ti;
          ar += tr;
          ai += ti;
        }
      }
    }
  }
}

// Transforms every (batch, channel) plane of (re, im) in place.
template <typename Scalar>
void transform_planes(Tensor<Scalar>& re, Tensor<Scalar>& im, FftDirection direction) {
  using Complex = std::complex<Scalar>;
  const Index n = re.n(), h = re.h(), w = re.w(), c = re.c();
  auto& engine = fft_engine<Scalar>();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(h * w));
  const bool forward = direction == FftDirection::Forward;

  if (power_of_two(h) && power_of_two(w)) {
    radix2_rows(re.data(), im.data(), n * h, w, c, forward);
    radix2_rows(re.data(), im.data(), n, h, w * c, forward);
    re.values() *= scale;
    im.values() *= scale;
    return;
  }

  std::vector<Complex> plane(static_cast<std::size_t>(h * w));
  std::vector<Complex> line_in(static_cast<std::size_t>(std::max(h, w)));
  std::vector<Complex> line_out(line_in.size());

  auto run = [&](Index len) {
    // kissfft crashes on a length-1 plan; the transform is the identity.
    if (len == 1) {
      line_out[0] = line_in[0];
    } else if (forward) {
      engine.fwd(line_out.data(), line_in.data(), len);
    } else {
      engine.inv(line_out.data(), line_in.data(), len);
    }
  };

  Scalar* pr = re.data();
  Scalar* pi = im.data();
  for (Index b = 0; b < n; ++b) {
    const Index base = b * h * w * c;
    for (Index ch = 0; ch < c; ++ch) {
      for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
          const Index idx = base + (y * w + x) * c + ch;
          line_in[static_cast<std::size_t>(x)] = Complex(pr[idx], pi[idx]);
        }
        run(w);
        std::copy_n(line_out.begin(), w, plane.begin() + y * w);
      }
      for (Index x = 0; x < w; ++x) {
        for (Index y = 0; y < h; ++y) line_in[static_cast<std::size_t>(y)] = plane[y * w + x];
        run(h);
        for (Index y = 0; y < h; ++y) {
          const Index idx = base + (y * w + x) * c + ch;
          const Complex v = line_out[static_cast<std::size_t>(y)] * scale;
          pr[idx] = v.real();
          pi[idx] = v.imag();
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
Spectrum<Scalar> fft2(const FeatureMap<Scalar>& x) {
  require_rank4(x.dims(), "fft2");
  if (!all_finite(x)) throw NumericError("fft2: non-finite input");
  Spectrum<Scalar> s(x, Tensor<Scalar>(x.dims()));
  transform_planes(s.real, s.imag, FftDirection::Forward);
  return s;
}

template <typename Scalar>
FeatureMap<Scalar> ifft2(const Spectrum<Scalar>& s, InverseResidue* residue) {
  require_rank4(s.dims(), "ifft2");
  if (!all_finite(s.real) || !all_finite(s.imag)) throw NumericError("ifft2: non-finite input");
  Spectrum<Scalar> t = s;
  transform_planes(t.real, t.imag, FftDirection::Inverse);
  if (residue != nullptr) {
    const double m = t.imag.empty() ? 0.0 : static_cast<double>(t.imag.values().abs().maxCoeff());
    residue->max_imag = std::max(residue->max_imag, m);
    ++residue->calls;
  }
  return std::move(t.real);
}

template <typename Scalar>
Spectrum<Scalar> transform(const Spectrum<Scalar>& s, FftDirection direction) {
  require_rank4(s.dims(), "transform");
  if (!all_finite(s.real) || !all_finite(s.imag)) throw NumericError("transform: non-finite input");
  Spectrum<Scalar> t = s;
  transform_planes(t.real, t.imag, direction);
  return t;
}

template <typename Scalar>
Tensor<Scalar> amplitude(const Spectrum<Scalar>& s) {
  Tensor<Scalar> a(s.dims());
  // Eigen's packet sqrt for float is an rsqrt refinement and differs from
  // std::sqrt in the last bit, which would make equal bins compare unequal
  // depending on where they fall in the buffer.
  const Scalar* re = s.real.data();
  const Scalar* im = s.imag.data();
  Scalar* out = a.data();
  for (Index i = 0; i < a.size(); ++i) out[i] = std::sqrt(re[i] * re[i] + im[i] * im[i]);
  return a;
}

template <typename Scalar>
AmpPhase<Scalar> decompose(const Spectrum<Scalar>& s) {
  AmpPhase<Scalar> ap{amplitude(s), Tensor<Scalar>(s.dims())};
  const auto& re = s.real.values();
  const auto& im = s.imag.values();
  auto& ph = ap.phase.values();
  for (Index i = 0; i < re.size(); ++i) {
    // atan2(+0, -x) is +pi and atan2(-0, -x) is -pi; fold the latter so the
    // range stays (-pi, pi].
    Scalar p = (re[i] == 0 && im[i] == 0) ? Scalar(0) : std::atan2(im[i], re[i]);
    if (p == -Scalar(EIGEN_PI)) p = Scalar(EIGEN_PI);
    ph[i] = p;
  }
  return ap;
}

template <typename Scalar>
Spectrum<Scalar> recombine(const AmpPhase<Scalar>& ap) {
  require_same_shape(ap.amplitude, ap.phase, "recombine");
  if ((ap.amplitude.values() < Scalar(0)).any()) {
    throw DataError("recombine: negative amplitude");
  }
  Spectrum<Scalar> s(ap.amplitude.dims());
  s.real.values() = ap.amplitude.values() * ap.phase.values().cos();
  s.imag.values() = ap.amplitude.values() * ap.phase.values().sin();
  return s;
}

template <typename Scalar>
std::pair<FeatureMap<Scalar>, FeatureMap<Scalar>> amplitude_swap(const FeatureMap<Scalar>& a,
                                                                  const FeatureMap<Scalar>& b) {
  require_same_shape(a, b, "amplitude_swap");
  AmpPhase<Scalar> pa = decompose(fft2(a));
  AmpPhase<Scalar> pb = decompose(fft2(b));
  AmpPhase<Scalar> b_on_a{pb.amplitude, pa.phase};
  AmpPhase<Scalar> a_on_b{pa.amplitude, pb.phase};
  return {ifft2(recombine(b_on_a)), ifft2(recombine(a_on_b))};
}

#define DDCNET_INSTANTIATE_SPECTRAL(S)                                                   \
  template Spectrum<S> fft2<S>(const FeatureMap<S>&);                                    \
  template FeatureMap<S> ifft2<S>(const Spectrum<S>&, InverseResidue*);                  \
  template Spectrum<S> transform<S>(const Spectrum<S>&, FftDirection);                   \
  template Tensor<S> amplitude<S>(const Spectrum<S>&);                                   \
  template AmpPhase<S> decompose<S>(const Spectrum<S>&);                                 \
  template Spectrum<S> recombine<S>(const AmpPhase<S>&);                                 \
  template std::pair<FeatureMap<S>, FeatureMap<S>> amplitude_swap<S>(const FeatureMap<S>&, \
                                                                     const FeatureMap<S>&);

DDCNET_INSTANTIATE_SPECTRAL(float)
DDCNET_INSTANTIATE_SPECTRAL(double)

}  // namespace ddcnet
