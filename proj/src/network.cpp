#include "ddcnet/network.hpp"

namespace ddcnet {

template <typename Scalar>
Stage<Scalar>::Stage(ParameterStore<Scalar>& store, const std::string& name, Index channels,
                     const NetConfig& cfg)
    : kind_(cfg.content_block),
      drm_(store, name + ".drm", channels,
           DrmOptions{cfg.reduction, cfg.amplitude_guidance, cfg.subtract_mean_amplitude}) {
  if (kind_ == ContentBlock::Crm) {
    crm_ = Crm<Scalar>(store, name + ".crm", channels, cfg.rdb_depth);
  } else {
    rdb_ = Rdb<Scalar>(store, name + ".rdb", channels, cfg.rdb_depth);
  }
}

template <typename Scalar>
FeatureMap<Scalar> Stage<Scalar>::forward(const FeatureMap<Scalar>& x, Cache* cache,
                                          InverseResidue* residue) const {
  const FeatureMap<Scalar> d = drm_.forward(x, cache ? &cache->drm : nullptr);
  if (kind_ == ContentBlock::Crm) return crm_.forward(d, cache ? &cache->crm : nullptr, residue);
  return rdb_.forward(d, cache ? &cache->rdb : nullptr);
}

template <typename Scalar>
FeatureMap<Scalar> Stage<Scalar>::backward(const FeatureMap<Scalar>& dy, const Cache& c) const {
  const FeatureMap<Scalar> dd =
      kind_ == ContentBlock::Crm ? crm_.backward(dy, c.crm) : rdb_.backward(dy, c.rdb);
  return drm_.backward(dd, c.drm);
}

template <typename Scalar>
Network<Scalar>::Network(ParameterStore<Scalar>& store) : config_(store.config) {
  config_.validate();
  const Index c0 = config_.channels(0);
  stem_ = Conv2d<Scalar>(store, "stem", 3, c0, 3);
  for (int s = 0; s < kScales; ++s) {
    const Index c = config_.channels(s);
    const std::string tag = std::to_string(s);
    enc_[s] = Stage<Scalar>(store, "enc" + tag, c, config_);
    down_[s] = Conv2d<Scalar>(store, "down" + tag, c, 2 * c, 4, 2, 1);
  }
  mid_ = Stage<Scalar>(store, "mid", config_.channels(kScales), config_);
  for (int s = kScales - 1; s >= 0; --s) {
    const Index c = config_.channels(s);
    const std::string tag = std::to_string(s);
    up_[s] = ConvTranspose2x2<Scalar>(store, "up" + tag, 2 * c, c);
    merge_[s] = Conv2d<Scalar>(store, "merge" + tag, 2 * c, c, 1);
    dec_[s] = Stage<Scalar>(store, "dec" + tag, c, config_);
  }
  // With the global residual a zero head makes the untrained network the
  // identity, so training starts from the degraded-input baseline.
  head_ = Conv2d<Scalar>(store, "head", c0, 3, 3, 1, -1,
                         config_.global_residual ? Init::Zero : Init::KaimingNormal);
}

template <typename Scalar>
std::vector<std::string> Network<Scalar>::layer_names() {
  return {"enc0", "enc1", "enc2", "mid", "dec2", "dec1", "dec0"};
}

template <typename Scalar>
FeatureMap<Scalar> Network<Scalar>::forward(const FeatureMap<Scalar>& img, Tape* tape, Taps* taps,
                                            InverseResidue* residue) const {
  require_rank4(img.dims(), "Network::forward");
  if (img.c() != 3) throw ShapeError("Network::forward: expected 3 channels, got " + img.shape_string());
  const Index div = config_.divisor();
  if (img.h() % div != 0 || img.w() % div != 0 || img.h() == 0 || img.w() == 0) {
    throw ShapeError("Network::forward: H and W must be positive multiples of " +
                     std::to_string(div) + ", got " + img.shape_string() + "; pad the input");
  }
  auto tap = [taps](const char* name, const FeatureMap<Scalar>& t) {
    if (taps) (*taps)[name] = t;
  };
  static const char* kEnc[] = {"enc0", "enc1", "enc2"};
  static const char* kDec[] = {"dec0", "dec1", "dec2"};

  FeatureMap<Scalar> h = stem_.forward(img);
  std::array<FeatureMap<Scalar>, kScales> skip;
  for (int s = 0; s < kScales; ++s) {
    tap(kEnc[s], h);
    h = enc_[s].forward(h, tape ? &tape->enc[s] : nullptr, residue);
    skip[s] = h;
    h = down_[s].forward(h);
  }
  tap("mid", h);
  h = mid_.forward(h, tape ? &tape->mid : nullptr, residue);
  for (int s = kScales - 1; s >= 0; --s) {
    if (tape) tape->up_in[s] = h;
    FeatureMap<Scalar> cat = concat_channels(up_[s].forward(h), skip[s]);
    h = merge_[s].forward(cat);
    if (tape) tape->merge_in[s] = std::move(cat);
    tap(kDec[s], h);
    h = dec_[s].forward(h, tape ? &tape->dec[s] : nullptr, residue);
  }
  FeatureMap<Scalar> out = head_.forward(h);
  if (config_.global_residual) out.values() += img.values();
  if (tape) {
    tape->image = img;
    tape->skip = std::move(skip);
    tape->head_in = std::move(h);
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> Network<Scalar>::backward(const FeatureMap<Scalar>& dout,
                                             const Tape& tape) const {
  require_same_shape(dout, tape.image, "Network::backward");
  FeatureMap<Scalar> dh = head_.backward(tape.head_in, dout);
  std::array<FeatureMap<Scalar>, kScales> dskip;
  for (int s = 0; s < kScales; ++s) {
    dh = dec_[s].backward(dh, tape.dec[s]);
    const FeatureMap<Scalar> dcat = merge_[s].backward(tape.merge_in[s], dh);
    const Index c = config_.channels(s);
    dskip[s] = slice_channels(dcat, c, c);
    dh = up_[s].backward(tape.up_in[s], slice_channels(dcat, 0, c));
  }
  dh = mid_.backward(dh, tape.mid);
  for (int s = kScales - 1; s >= 0; --s) {
    dh = down_[s].backward(tape.skip[s], dh);
    dh.values() += dskip[s].values();
    dh = enc_[s].backward(dh, tape.enc[s]);
  }
  FeatureMap<Scalar> dimg = stem_.backward(tape.image, dh);
  if (config_.global_residual) dimg.values() += dout.values();
  return dimg;
}

template <typename Scalar>
ParameterStore<Scalar> build_model(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParameterStore<Scalar> store(cfg, seed);
  store.allow_create(true);
  Network<Scalar> bind(store);
  store.allow_create(false);
  return store;
}

template <typename Scalar>
FeatureMap<Scalar> forward(ParameterStore<Scalar>& store, const FeatureMap<Scalar>& img) {
  return Network<Scalar>(store).forward(img);
}

template class Stage<float>;
template class Stage<double>;
template class Network<float>;
template class Network<double>;
template ParameterStore<float> build_model<float>(const NetConfig&, std::uint64_t);
template ParameterStore<double> build_model<double>(const NetConfig&, std::uint64_t);
template FeatureMap<float> forward<float>(ParameterStore<float>&, const FeatureMap<float>&);
template FeatureMap<double> forward<double>(ParameterStore<double>&, const FeatureMap<double>&);

}  // namespace ddcnet
