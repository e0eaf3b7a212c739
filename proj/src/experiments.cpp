#include <algorithm>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ddcnet/analysis.hpp"
#include "ddcnet/harness.hpp"
#include "ddcnet/network.hpp"
#include "ddcnet/spectral.hpp"

namespace ddcnet {

std::vector<AblationVariant> ablation_variants(const TrainConfig& base) {
  auto with = [&](auto edit) {
    TrainConfig c = base;
    edit(c);
    c.checkpoint.clear();
    c.log.clear();
    c.stop_at = 0;
    return c;
  };
  return {
      {"Model-1", "ablation", 32.24,
       with([](TrainConfig& c) {
         c.net.amplitude_guidance = false;
         c.net.subtract_mean_amplitude = false;
       })},
      {"Model-2", "ablation", 32.42,
       with([](TrainConfig& c) { c.net.subtract_mean_amplitude = false; })},
      {"Model-3", "ablation", 32.39,
       with([](TrainConfig& c) { c.net.content_block = ContentBlock::RdbOnly; })},
      {"Full", "ablation", 32.57, with([](TrainConfig&) {})},
      {"Loss (1,1,0)", "loss", 32.37, with([](TrainConfig& c) { c.loss = {1, 1, 0}; })},
      {"Loss (1,0,1)", "loss", 32.34, with([](TrainConfig& c) { c.loss = {1, 0, 1}; })},
      {"Loss (1,1,1)", "loss", 32.57, with([](TrainConfig& c) { c.loss = {1, 1, 1}; })},
  };
}

AblationTable run_ablations(const TrainConfig& base, const SampleSource& train_data,
                            const SampleSource& test_data,
                            const std::function<void(const std::string&)>& progress) {
  base.validate();
  AblationTable table;
  table.steps = base.steps;
  const auto variants = ablation_variants(base);
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto& v = variants[i];
    AblationRow row;
    row.variant = v.name;
    row.table = v.table;
    row.reference_psnr = v.reference_psnr;
    const auto same = std::find_if(variants.begin(), variants.begin() + static_cast<long>(i),
                                   [&](const AblationVariant& o) { return o.cfg == v.cfg; });
    if (same != variants.begin() + static_cast<long>(i)) {
      const AblationRow& prev = table.rows[static_cast<std::size_t>(same - variants.begin())];
      row.params = prev.params;
      row.psnr = prev.psnr;
      row.ssim = prev.ssim;
      row.input_psnr = prev.input_psnr;
      row.note = "same run as " + prev.variant;
    } else {
      const TrainResult run = train(v.cfg, train_data);
      const MetricsReport report = evaluate(run.store, test_data);
      row.params = count_params(run.store);
      for (const auto& [w, m] : report.per_weather) {
        row.psnr += m.psnr;
        row.ssim += m.ssim;
        row.input_psnr += m.input_psnr;
      }
      const double n = static_cast<double>(report.per_weather.size());
      row.psnr /= n;
      row.ssim /= n;
      row.input_psnr /= n;
    }
    table.rows.push_back(row);
    if (progress) {
      std::ostringstream os;
      os << std::fixed << std::setprecision(3) << v.name << ": params " << row.params << ", PSNR "
         << row.psnr << ", SSIM " << row.ssim;
      progress(os.str());
    }
  }
  return table;
}

std::string AblationTable::to_json() const {
  nlohmann::json j;
  j["steps"] = steps;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"variant", r.variant},
                         {"table", r.table},
                         {"params", r.params},
                         {"psnr", r.psnr},
                         {"ssim", r.ssim},
                         {"input_psnr", r.input_psnr},
                         {"reference_psnr", r.reference_psnr},
                         {"note", r.note}});
  }
  return j.dump(2);
}

std::string AblationTable::to_csv() const {
  std::ostringstream os;
  os << "variant,table,params,psnr,ssim,input_psnr,reference_psnr,note\n" << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.variant << ',' << r.table << ',' << r.params << ',' << r.psnr << ',' << r.ssim << ','
       << r.input_psnr << ',' << r.reference_psnr << ',' << r.note << '\n';
  }
  return os.str();
}

std::string AblationTable::to_text() const {
  std::ostringstream os;
  os << "variant        params     PSNR    SSIM  input PSNR    ref PSNR\n" << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(14) << r.variant << std::right << std::setw(8) << r.params
       << std::setprecision(3) << std::setw(9) << r.psnr << std::setprecision(4) << std::setw(8)
       << r.ssim << std::setprecision(3) << std::setw(12) << r.input_psnr << std::setprecision(2)
       << std::setw(12) << r.reference_psnr;
    if (!r.note.empty()) os << "  (" << r.note << ")";
    os << '\n';
  }
  os << "(" << steps << " steps per variant; reference values are context only)\n";
  return os.str();
}

AmpStats analyze_amp_stats(const SampleSource& data, Index n) {
  if (n < 1) throw ConfigError("amp-stats needs n >= 1");
  AmpStats stats;
  stats.per_weather = n;
  for (Weather w : kWeathers) {
    const auto idx = data.indices_of(w);
    if (static_cast<Index>(idx.size()) < n) {
      throw DataError("amp-stats: " + to_string(w) + " has " + std::to_string(idx.size()) +
                      " samples, need " + std::to_string(n));
    }
    std::vector<double> mean(kRadialBins, 0.0);
    for (Index k = 0; k < n; ++k) {
      const WeatherSample s = data.get(idx[static_cast<std::size_t>(k)]);
      const auto d = radial_log_amplitude(s.degraded);
      const auto c = radial_log_amplitude(s.clean);
      for (int b = 0; b < kRadialBins; ++b) mean[b] += (d[b] - c[b]) / static_cast<double>(n);
    }
    stats.profiles.push_back(std::move(mean));
  }
  return stats;
}

std::string AmpStats::to_json() const {
  nlohmann::json j;
  j["per_weather"] = per_weather;
  j["bins"] = kRadialBins;
  for (std::size_t i = 0; i < profiles.size(); ++i) j["profiles"][to_string(kWeathers[i])] = profiles[i];
  return j.dump(2);
}

std::string AmpStats::to_csv() const {
  std::ostringstream os;
  os << "bin,radius";
  for (std::size_t i = 0; i < profiles.size(); ++i) os << ',' << to_string(kWeathers[i]);
  os << '\n' << std::setprecision(10);
  for (int b = 0; b < kRadialBins; ++b) {
    os << b << ',' << 0.5 * (b + 0.5) / kRadialBins;
    for (const auto& p : profiles) os << ',' << p[static_cast<std::size_t>(b)];
    os << '\n';
  }
  return os.str();
}

AmpSwap analyze_amp_swap(const WeatherSample& pair) {
  require_same_shape(pair.degraded, pair.clean, "amp-swap");
  AmpSwap r;
  r.degraded = pair.degraded;
  r.clean = pair.clean;
  auto [clean_amp, degraded_amp] = amplitude_swap(pair.degraded, pair.clean);
  r.clean_amp_degraded_phase = clamp_unit(clean_amp);
  r.degraded_amp_clean_phase = clamp_unit(degraded_amp);
  r.psnr_degraded = psnr(pair.degraded, pair.clean);
  r.psnr_clean_amp = psnr(r.clean_amp_degraded_phase, pair.clean);
  r.psnr_degraded_amp = psnr(r.degraded_amp_clean_phase, pair.clean);
  return r;
}

std::string AmpSwap::to_json() const {
  nlohmann::json j = {{"psnr_degraded", psnr_degraded},
                      {"psnr_clean_amp_degraded_phase", psnr_clean_amp},
                      {"psnr_degraded_amp_clean_phase", psnr_degraded_amp}};
  return j.dump(2);
}

FeatureDump dump_features(const ParameterStore<float>& store, const SampleSource& data,
                          const std::string& layer, Index per_weather) {
  const auto names = Network<float>::layer_names();
  if (layer != "image" && std::find(names.begin(), names.end(), layer) == names.end()) {
    std::string known = "image";
    for (const auto& n : names) known += ", " + n;
    throw ConfigError("unknown layer '" + layer + "' (known: " + known + ")");
  }
  ParameterStore<float> local = store;
  local.allow_create(false);
  const Network<float> net(local);
  FeatureDump dump;
  dump.layer = layer;
  for (Weather w : kWeathers) {
    auto idx = data.indices_of(w);
    if (per_weather > 0 && static_cast<Index>(idx.size()) > per_weather) idx.resize(per_weather);
    for (Index i : idx) {
      const WeatherSample s = data.get(i);
      FeatureMap<float> map;
      if (layer == "image") {
        map = s.degraded;
      } else {
        Network<float>::Taps taps;
        net.forward(reflect_pad(s.degraded, net.config().divisor()), nullptr, &taps);
        map = taps.at(layer);
      }
      const Tensor<double> m = map.cast<double>();
      const Index pixels = m.h() * m.w();
      std::vector<double> pooled(static_cast<std::size_t>(m.c()));
      Eigen::Map<Eigen::VectorXd>(pooled.data(), m.c()) =
          m.matrix().colwise().sum().transpose() / static_cast<double>(pixels);
      dump.features.push_back(std::move(pooled));
      dump.amplitudes.push_back(radial_log_amplitude_plane(channel_mean(m)));
      dump.tags.push_back(w);
    }
  }
  if (dump.tags.empty()) throw DataError("dump_features: empty dataset");
  return dump;
}

std::string FeatureDump::to_csv() const {
  std::ostringstream os;
  os << "tag";
  for (std::size_t i = 0; i < features.front().size(); ++i) os << ",f" << i;
  for (std::size_t i = 0; i < amplitudes.front().size(); ++i) os << ",a" << i;
  os << '\n' << std::setprecision(9);
  for (std::size_t r = 0; r < tags.size(); ++r) {
    os << to_string(tags[r]);
    for (double v : features[r]) os << ',' << v;
    for (double v : amplitudes[r]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

std::string FeatureDump::to_json() const {
  nlohmann::json j;
  j["layer"] = layer;
  j["features"] = features;
  j["amplitudes"] = amplitudes;
  std::vector<std::string> t;
  for (Weather w : tags) t.push_back(to_string(w));
  j["tags"] = t;
  return j.dump();
}

}  // namespace ddcnet
