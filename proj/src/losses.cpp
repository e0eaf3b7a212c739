#include "ddcnet/losses.hpp"

#include <cmath>

#include "ddcnet/spectral.hpp"

namespace ddcnet {

void LossWeights::validate() const {
  if (!(mae >= 0) || !(fft >= 0) || !(dm >= 0)) {
    throw ConfigError("loss weights must be non-negative");
  }
}

template <typename Scalar>
Scalar mae_loss(const FeatureMap<Scalar>& out, const FeatureMap<Scalar>& gt) {
  require_same_shape(out, gt, "mae_loss");
  if (out.empty()) return Scalar(0);
  return static_cast<Scalar>((out.values() - gt.values()).abs().template cast<double>().mean());
}

template <typename Scalar>
FeatureMap<Scalar> mae_loss_grad(const FeatureMap<Scalar>& out, const FeatureMap<Scalar>& gt) {
  require_same_shape(out, gt, "mae_loss_grad");
  FeatureMap<Scalar> g(out.dims());
  g.values() = (out.values() - gt.values()).sign() / static_cast<Scalar>(out.size());
  return g;
}

template <typename Scalar>
Scalar fft_loss(const FeatureMap<Scalar>& out, const FeatureMap<Scalar>& gt) {
  require_same_shape(out, gt, "fft_loss");
  FeatureMap<Scalar> diff = gt;
  diff.values() -= out.values();
  const Spectrum<Scalar> d = fft2(diff);
  const double sum = d.real.values().abs().template cast<double>().sum() +
                     d.imag.values().abs().template cast<double>().sum();
  return static_cast<Scalar>(sum / (2.0 * static_cast<double>(out.size())));
}

template <typename Scalar>
FeatureMap<Scalar> fft_loss_grad(const FeatureMap<Scalar>& out, const FeatureMap<Scalar>& gt) {
  require_same_shape(out, gt, "fft_loss_grad");
  FeatureMap<Scalar> diff = gt;
  diff.values() -= out.values();
  Spectrum<Scalar> d = fft2(diff);
  d.real.values() = d.real.values().sign();
  d.imag.values() = d.imag.values().sign();
  // d/d(out) of sum|Re D| + |Im D| with D = fft2(gt - out).
  FeatureMap<Scalar> g = ifft2(d);
  g.values() *= Scalar(-1) / static_cast<Scalar>(2 * out.size());
  return g;
}

namespace {

template <typename Scalar>
struct ResidualPair {
  Eigen::Array<Scalar, Eigen::Dynamic, 1> r_out;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> r_gt;
};

template <typename Scalar>
ResidualPair<Scalar> residuals(const FeatureMap<Scalar>& inp, const FeatureMap<Scalar>& out,
                               const FeatureMap<Scalar>& gt, Index b) {
  const Index per = inp.size() / inp.n();
  return {out.values().segment(b * per, per) - inp.values().segment(b * per, per),
          gt.values().segment(b * per, per) - inp.values().segment(b * per, per)};
}

void check_dm_shapes(const char* what, const std::vector<Index>& a, const std::vector<Index>& b,
                     const std::vector<Index>& c) {
  require_rank4(a, what);
  if (a != b || a != c) throw ShapeError(std::string(what) + ": shape mismatch");
}

}  // namespace

template <typename Scalar>
Scalar dm_loss(const FeatureMap<Scalar>& inp, const FeatureMap<Scalar>& out,
               const FeatureMap<Scalar>& gt) {
  check_dm_shapes("dm_loss", inp.dims(), out.dims(), gt.dims());
  double total = 0.0;
  for (Index b = 0; b < inp.n(); ++b) {
    const auto r = residuals(inp, out, gt, b);
    const double ng = std::sqrt(r.r_gt.template cast<double>().square().sum());
    if (ng == 0.0) continue;
    const double no = std::sqrt(r.r_out.template cast<double>().square().sum());
    const double dot = (r.r_out.template cast<double>() * r.r_gt.template cast<double>()).sum();
    total += 1.0 - dot / std::max(no * ng, kDmEpsilon);
  }
  return static_cast<Scalar>(total / static_cast<double>(inp.n()));
}

template <typename Scalar>
FeatureMap<Scalar> dm_loss_grad(const FeatureMap<Scalar>& inp, const FeatureMap<Scalar>& out,
                                const FeatureMap<Scalar>& gt) {
  check_dm_shapes("dm_loss_grad", inp.dims(), out.dims(), gt.dims());
  FeatureMap<Scalar> g(out.dims());
  const Index per = inp.size() / inp.n();
  const double inv_batch = 1.0 / static_cast<double>(inp.n());
  for (Index b = 0; b < inp.n(); ++b) {
    const auto r = residuals(inp, out, gt, b);
    const double ng = std::sqrt(r.r_gt.template cast<double>().square().sum());
    if (ng == 0.0) continue;
    const double no = std::sqrt(r.r_out.template cast<double>().square().sum());
    const double dot = (r.r_out.template cast<double>() * r.r_gt.template cast<double>()).sum();
    const double prod = no * ng;
    auto seg = g.values().segment(b * per, per);
    if (prod > kDmEpsilon) {
      const double cosine = dot / prod;
      // d(cos)/d(r_out) = r_gt / (|r_out||r_gt|) - cos * r_out / |r_out|^2
      seg = (-(r.r_gt.template cast<double>() / prod -
               cosine * r.r_out.template cast<double>() / (no * no)) *
             inv_batch)
                .template cast<Scalar>();
    } else {
      seg = (-r.r_gt.template cast<double>() / kDmEpsilon * inv_batch).template cast<Scalar>();
    }
  }
  return g;
}

template <typename Scalar>
LossBreakdown<Scalar> total_loss(const FeatureMap<Scalar>& inp, const FeatureMap<Scalar>& out,
                                 const FeatureMap<Scalar>& gt, const LossWeights& w,
                                 FeatureMap<Scalar>* grad_out) {
  w.validate();
  check_dm_shapes("total_loss", inp.dims(), out.dims(), gt.dims());
  LossBreakdown<Scalar> l;
  l.mae = mae_loss(out, gt);
  l.fft = fft_loss(out, gt);
  l.dm = dm_loss(inp, out, gt);
  l.total = static_cast<Scalar>(w.mae * static_cast<double>(l.mae) +
                                w.fft * static_cast<double>(l.fft) +
                                w.dm * static_cast<double>(l.dm));
  if (grad_out != nullptr) {
    FeatureMap<Scalar> g(out.dims());
    if (w.mae != 0) g.values() += Scalar(w.mae) * mae_loss_grad(out, gt).values();
    if (w.fft != 0) g.values() += Scalar(w.fft) * fft_loss_grad(out, gt).values();
    if (w.dm != 0) g.values() += Scalar(w.dm) * dm_loss_grad(inp, out, gt).values();
    *grad_out = std::move(g);
  }
  return l;
}

#define DDCNET_INSTANTIATE_LOSSES(S)                                                          \
  template S mae_loss<S>(const FeatureMap<S>&, const FeatureMap<S>&);                         \
  template FeatureMap<S> mae_loss_grad<S>(const FeatureMap<S>&, const FeatureMap<S>&);        \
  template S fft_loss<S>(const FeatureMap<S>&, const FeatureMap<S>&);                         \
  template FeatureMap<S> fft_loss_grad<S>(const FeatureMap<S>&, const FeatureMap<S>&);        \
  template S dm_loss<S>(const FeatureMap<S>&, const FeatureMap<S>&, const FeatureMap<S>&);    \
  template FeatureMap<S> dm_loss_grad<S>(const FeatureMap<S>&, const FeatureMap<S>&,          \
                                         const FeatureMap<S>&);                               \
  template LossBreakdown<S> total_loss<S>(const FeatureMap<S>&, const FeatureMap<S>&,         \
                                          const FeatureMap<S>&, const LossWeights&,           \
                                          FeatureMap<S>*);

DDCNET_INSTANTIATE_LOSSES(float)
DDCNET_INSTANTIATE_LOSSES(double)

}  // namespace ddcnet
