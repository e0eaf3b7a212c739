#include "ddcnet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "ddcnet/checkpoint.hpp"
#include "ddcnet/network.hpp"
#include "ddcnet/rng.hpp"

namespace ddcnet {
namespace {

// One documented config key bound to a TrainConfig member.
struct Field {
  const char* key;
  const char* doc;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad unsigned integer for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

#define DDC_DOUBLE(key, doc, member)                                                  \
  Field {                                                                             \
    key, doc, [](const TrainConfig& c) { return fmt_double(c.member); },              \
        [](TrainConfig& c, const std::string& v) { c.member = parse_double(key, v); } \
  }
#define DDC_INDEX(key, doc, member)                                                   \
  Field {                                                                             \
    key, doc, [](const TrainConfig& c) { return std::to_string(c.member); },          \
        [](TrainConfig& c, const std::string& v) {                                    \
          c.member = static_cast<decltype(c.member)>(parse_int(key, v));              \
        }                                                                             \
  }
#define DDC_BOOL(key, doc, member)                                                  \
  Field {                                                                           \
    key, doc, [](const TrainConfig& c) { return std::string(c.member ? "1" : "0"); }, \
        [](TrainConfig& c, const std::string& v) { c.member = parse_bool(key, v); } \
  }
#define DDC_STRING(key, doc, member)                                     \
  Field {                                                                \
    key, doc, [](const TrainConfig& c) { return c.member; },             \
        [](TrainConfig& c, const std::string& v) { c.member = v; }       \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      DDC_INDEX("net.base_channels", "channels at the first scale (C0)", net.base_channels),
      DDC_INDEX("net.scales", "encoder/decoder scales (fixed at 3)", net.scales),
      DDC_INDEX("net.rdb_depth", "dense layers per residual dense block", net.rdb_depth),
      DDC_INDEX("net.reduction", "DRM gate bottleneck reduction ratio", net.reduction),
      DDC_BOOL("net.global_residual", "add the input image to the output", net.global_residual),
      DDC_BOOL("net.amplitude_guidance", "DRM gates from amplitude statistics (0 = gate of 1)",
               net.amplitude_guidance),
      DDC_BOOL("net.subtract_mean_amplitude",
               "DRM subtracts the channel-mean amplitude before pooling",
               net.subtract_mean_amplitude),
      Field{"net.content_block", "crm, or rdb to replace every CRM with an RDB",
            [](const TrainConfig& c) {
              return std::string(c.net.content_block == ContentBlock::Crm ? "crm" : "rdb");
            },
            [](TrainConfig& c, const std::string& v) {
              if (v == "crm") c.net.content_block = ContentBlock::Crm;
              else if (v == "rdb") c.net.content_block = ContentBlock::RdbOnly;
              else throw ConfigError("net.content_block must be crm or rdb, got '" + v + "'");
            }},
      DDC_DOUBLE("loss.mae", "weight of the L1 loss", loss.mae),
      DDC_DOUBLE("loss.fft", "weight of the Fourier-domain L1 loss", loss.fft),
      DDC_DOUBLE("loss.dm", "weight of the degradation-mapping loss", loss.dm),
      DDC_DOUBLE("adam.beta1", "Adam first-moment decay", adam.beta1),
      DDC_DOUBLE("adam.beta2", "Adam second-moment decay", adam.beta2),
      DDC_DOUBLE("adam.eps", "Adam denominator epsilon", adam.eps),
      DDC_INDEX("batch", "images per step", batch),
      DDC_INDEX("patch", "square crop size, a multiple of 8", patch),
      DDC_INDEX("steps", "optimizer steps; the cosine schedule spans them", steps),
      DDC_INDEX("stop_at", "stop after this many steps (0 = run all), for resumable runs",
                stop_at),
      DDC_DOUBLE("lr_start", "learning rate at step 0", lr_start),
      DDC_DOUBLE("lr_end", "learning rate at the last step", lr_end),
      Field{"seed", "master seed; data, init and batches derive from it",
            [](const TrainConfig& c) { return std::to_string(c.seed); },
            [](TrainConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
      DDC_INDEX("data.train_per_weather", "synthetic training pairs per weather",
                train_per_weather),
      DDC_INDEX("data.test_per_weather", "synthetic test pairs per weather", test_per_weather),
      DDC_INDEX("data.train_size", "synthetic training image side", train_size),
      DDC_INDEX("data.test_size", "synthetic test image side", test_size),
      DDC_STRING("data.train_dir", "paired folder used instead of synthetic training data",
                 train_dir),
      DDC_STRING("data.test_dir", "paired folder used instead of synthetic test data", test_dir),
      DDC_DOUBLE("rain.density", "streaks per 64x64 area", degrade.rain.density),
      DDC_DOUBLE("rain.length_min", "shortest streak, pixels", degrade.rain.length_min),
      DDC_DOUBLE("rain.length_max", "longest streak, pixels", degrade.rain.length_max),
      DDC_DOUBLE("rain.angle_min", "streak angle from vertical, degrees", degrade.rain.angle_min),
      DDC_DOUBLE("rain.angle_max", "streak angle from vertical, degrees", degrade.rain.angle_max),
      DDC_DOUBLE("rain.width", "Gaussian sigma of the streak profile", degrade.rain.width),
      DDC_DOUBLE("rain.intensity_min", "streak peak brightness", degrade.rain.intensity_min),
      DDC_DOUBLE("rain.intensity_max", "streak peak brightness", degrade.rain.intensity_max),
      DDC_DOUBLE("haze.t_min", "smallest transmission", degrade.haze.t_min),
      DDC_DOUBLE("haze.t_max", "largest transmission", degrade.haze.t_max),
      DDC_DOUBLE("haze.airlight_min", "airlight lower bound", degrade.haze.airlight_min),
      DDC_DOUBLE("haze.airlight_max", "airlight upper bound", degrade.haze.airlight_max),
      DDC_DOUBLE("snow.density", "flakes per 64x64 area", degrade.snow.density),
      DDC_DOUBLE("snow.radius_min", "smallest flake radius, pixels", degrade.snow.radius_min),
      DDC_DOUBLE("snow.radius_max", "largest flake radius, pixels", degrade.snow.radius_max),
      DDC_DOUBLE("snow.opacity_min", "flake opacity lower bound", degrade.snow.opacity_min),
      DDC_DOUBLE("snow.opacity_max", "flake opacity upper bound", degrade.snow.opacity_max),
      DDC_DOUBLE("snow.color", "flake grey level", degrade.snow.color),
      DDC_STRING("checkpoint", "checkpoint path (empty = none)", checkpoint),
      DDC_INDEX("checkpoint_every", "also checkpoint every N steps (0 = end only)",
                checkpoint_every),
      DDC_STRING("log", "JSON run log path (empty = none)", log),
      DDC_INDEX("eval_every", "evaluate every N steps (0 = never)", eval_every),
      DDC_INDEX("eval_per_weather", "test images per weather for periodic evaluation",
                eval_per_weather),
      DDC_INDEX("log_every", "progress line every N steps (0 = silent)", log_every),
  };
  return table;
}

#undef DDC_DOUBLE
#undef DDC_INDEX
#undef DDC_BOOL
#undef DDC_STRING

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void TrainConfig::validate() const {
  net.validate();
  loss.validate();
  degrade.validate();
  require(adam.beta1 >= 0 && adam.beta1 < 1, "adam.beta1 must lie in [0, 1)");
  require(adam.beta2 >= 0 && adam.beta2 < 1, "adam.beta2 must lie in [0, 1)");
  require(adam.eps > 0, "adam.eps must be positive");
  require(batch >= 1, "batch must be positive");
  require(patch >= 8 && patch % 8 == 0, "patch must be a positive multiple of 8");
  require(steps >= 1, "steps must be positive");
  require(stop_at >= 0 && stop_at <= steps, "stop_at must lie in [0, steps]");
  require(lr_end > 0 && lr_start >= lr_end, "need lr_start >= lr_end > 0");
  require(train_per_weather >= 1 && test_per_weather >= 1, "dataset sizes must be positive");
  require(train_size >= patch, "data.train_size must be at least the patch size");
  require(test_size >= 11, "data.test_size must be at least 11 (SSIM window)");
  require(checkpoint_every >= 0 && eval_every >= 0 && log_every >= 0,
          "intervals must be non-negative");
  require(eval_per_weather >= 1, "eval_per_weather must be positive");
}

std::string TrainConfig::serialize() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + "=" + f.get(*this) + "\n";
  return out;
}

std::string TrainConfig::documented() const {
  std::string out;
  for (const auto& f : fields()) {
    out += std::string("# ") + f.doc + "\n" + f.key + "=" + f.get(*this) + "\n";
  }
  return out;
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return key == f.key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

double lr_at(Index step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.steps) {
    throw ConfigError("lr_at: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(cfg.steps) + "]");
  }
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.steps);
  return cfg.lr_end + 0.5 * (cfg.lr_start - cfg.lr_end) * (1.0 + std::cos(M_PI * frac));
}

template <typename Scalar>
void adam_step(ParameterStore<Scalar>& store, double lr, const AdamOptions& opt) {
  const double t = static_cast<double>(store.step + 1);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  const Scalar b1 = static_cast<Scalar>(opt.beta1), b2 = static_cast<Scalar>(opt.beta2);
  const Scalar step_size = static_cast<Scalar>(lr / c1);
  const Scalar inv_c2 = static_cast<Scalar>(1.0 / c2);
  const Scalar eps = static_cast<Scalar>(opt.eps);
  auto& state = store.optimizer_state();
  for (auto& [name, entry] : store.entries()) {
    auto& m = state["adam.m:" + name];
    auto& v = state["adam.v:" + name];
    if (!m.same_shape(entry.value)) m = Tensor<Scalar>(entry.value.dims());
    if (!v.same_shape(entry.value)) v = Tensor<Scalar>(entry.value.dims());
    const auto& g = entry.grad.values();
    m.values() = b1 * m.values() + (Scalar(1) - b1) * g;
    v.values() = b2 * v.values() + (Scalar(1) - b2) * g.square();
    entry.value.values() -= step_size * m.values() / ((v.values() * inv_c2).sqrt() + eps);
  }
  ++store.step;
}

template void adam_step<float>(ParameterStore<float>&, double, const AdamOptions&);
template void adam_step<double>(ParameterStore<double>&, double, const AdamOptions&);

double RunLog::mean_loss(Index first, Index count) const {
  if (first < 0 || count < 1 || first + count > static_cast<Index>(steps.size())) {
    throw ConfigError("RunLog::mean_loss: range outside the log");
  }
  double sum = 0;
  for (Index i = first; i < first + count; ++i) sum += steps[static_cast<std::size_t>(i)].loss;
  return sum / static_cast<double>(count);
}

std::string RunLog::to_json() const {
  nlohmann::json j;
  j["steps"] = nlohmann::json::array();
  for (const auto& s : steps) {
    j["steps"].push_back({{"step", s.step},
                          {"loss", s.loss},
                          {"mae", s.mae},
                          {"fft", s.fft},
                          {"dm", s.dm},
                          {"lr", s.lr},
                          {"batch_seed", s.batch_seed}});
  }
  j["evals"] = nlohmann::json::array();
  for (const auto& e : evals) {
    nlohmann::json r = nlohmann::json::parse(e.report.to_json());
    r["step"] = e.step;
    j["evals"].push_back(r);
  }
  j["warnings"] = warnings;
  return j.dump(1);
}

std::uint64_t init_seed(std::uint64_t master) { return derive_seed({master, hash_string("init")}); }
std::uint64_t batch_seed(std::uint64_t master, Index step) {
  return derive_seed({master, hash_string("batch"), static_cast<std::uint64_t>(step)});
}
std::uint64_t train_data_seed(std::uint64_t master) {
  return derive_seed({master, hash_string("train-data")});
}
std::uint64_t test_data_seed(std::uint64_t master) {
  return derive_seed({master, hash_string("test-data")});
}

std::unique_ptr<SampleSource> make_train_source(const TrainConfig& cfg) {
  if (!cfg.train_dir.empty()) return std::make_unique<MemorySource>(load_folder(cfg.train_dir));
  return std::make_unique<SyntheticSource>(cfg.train_per_weather, cfg.train_size, cfg.degrade,
                                           train_data_seed(cfg.seed));
}

std::unique_ptr<SampleSource> make_test_source(const TrainConfig& cfg) {
  if (!cfg.test_dir.empty()) return std::make_unique<MemorySource>(load_folder(cfg.test_dir));
  return std::make_unique<SyntheticSource>(cfg.test_per_weather, cfg.test_size, cfg.degrade,
                                           test_data_seed(cfg.seed));
}

TrainResult train(const TrainConfig& cfg, const SampleSource& data, const SampleSource* eval_data,
                  const ParameterStore<float>* resume) {
  cfg.validate();
  TrainResult result;
  if (resume != nullptr) {
    if (!(resume->config == cfg.net)) {
      throw ConfigError("resume: checkpoint architecture differs from the config");
    }
    if (static_cast<Index>(resume->step) > cfg.steps) {
      throw ConfigError("resume: checkpoint is past the configured step budget");
    }
    result.store = *resume;
  } else {
    result.store = build_model<float>(cfg.net, init_seed(cfg.seed));
  }
  ParameterStore<float>& store = result.store;
  RunLog& log = result.log;
  Network<float> net(store);

  const Index end = cfg.stop_at > 0 ? cfg.stop_at : cfg.steps;
  const auto t0 = std::chrono::steady_clock::now();
  const double wall0 = store.wall_time;
  std::vector<double> recent;

  auto save = [&] {
    if (cfg.checkpoint.empty()) return;
    store.wall_time =
        wall0 + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_checkpoint(store, cfg.checkpoint);
  };

  for (Index step = static_cast<Index>(store.step); step < end; ++step) {
    const std::uint64_t seed = batch_seed(cfg.seed, step);
    const Batch batch = sample_batch(data, cfg.batch, cfg.patch, seed);
    store.zero_grad();
    Network<float>::Tape tape;
    const FeatureMap<float> out = net.forward(batch.inp, &tape);
    FeatureMap<float> dout;
    const auto loss = total_loss(batch.inp, out, batch.gt, cfg.loss, &dout);
    if (!std::isfinite(loss.total) || !std::isfinite(loss.mae) || !std::isfinite(loss.fft) ||
        !std::isfinite(loss.dm)) {
      throw NumericError("non-finite loss at step " + std::to_string(step + 1) +
                         " (batch seed " + std::to_string(seed) + ", mae " +
                         std::to_string(loss.mae) + ", fft " + std::to_string(loss.fft) +
                         ", dm " + std::to_string(loss.dm) + ")");
    }
    net.backward(dout, tape);
    const double lr = lr_at(step, cfg);
    adam_step(store, lr, cfg.adam);

    log.steps.push_back({step + 1, loss.total, loss.mae, loss.fft, loss.dm, lr, seed});

    // Spikes are reported, not fatal.
    if (recent.size() >= 10) {
      std::vector<double> sorted = recent;
      std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
      const double median = sorted[sorted.size() / 2];
      if (loss.total > 100.0 * median) {
        log.warnings.push_back("step " + std::to_string(step + 1) + ": loss " +
                               std::to_string(loss.total) + " exceeds 100x running median " +
                               std::to_string(median));
        std::cerr << "warning: " << log.warnings.back() << '\n';
      }
    }
    recent.push_back(loss.total);
    if (recent.size() > 100) recent.erase(recent.begin());

    const Index done = step + 1;
    if (cfg.log_every > 0 && (done % cfg.log_every == 0 || done == end)) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "step %lld/%lld loss %.5f (mae %.5f fft %.5f dm %.5f) lr %.3g %.1fs\n",
                   static_cast<long long>(done), static_cast<long long>(cfg.steps),
                   static_cast<double>(loss.total), static_cast<double>(loss.mae),
                   static_cast<double>(loss.fft), static_cast<double>(loss.dm), lr, secs);
    }
    if (eval_data != nullptr && cfg.eval_every > 0 && done % cfg.eval_every == 0) {
      log.evals.push_back({done, evaluate(store, *eval_data, cfg.eval_per_weather)});
    }
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done != end) save();
  }
  save();
  if (!cfg.log.empty()) {
    std::ofstream out(cfg.log);
    if (!out) throw DataError("cannot write run log " + cfg.log);
    out << log.to_json() << '\n';
  }
  return result;
}

Image reflect_pad(const Image& img, Index m) {
  require_rank4(img.dims(), "reflect_pad");
  const Index h = img.h(), w = img.w(), c = img.c();
  const Index ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
  if (ph - h >= h || pw - w >= w) throw ShapeError("reflect_pad: image too small to reflect");
  Image out(img.n(), ph, pw, c);
  auto reflect = [](Index i, Index n) { return i < n ? i : 2 * n - 2 - i; };
  for (Index b = 0; b < img.n(); ++b)
    for (Index y = 0; y < ph; ++y)
      for (Index x = 0; x < pw; ++x)
        for (Index ch = 0; ch < c; ++ch) out(b, y, x, ch) = img(b, reflect(y, h), reflect(x, w), ch);
  return out;
}

Image crop(const Image& img, Index h, Index w) {
  require_rank4(img.dims(), "crop");
  if (h > img.h() || w > img.w()) throw ShapeError("crop: target larger than image");
  Image out(img.n(), h, w, img.c());
  for (Index b = 0; b < img.n(); ++b)
    for (Index y = 0; y < h; ++y) std::copy_n(&img(b, y, 0, 0), w * img.c(), &out(b, y, 0, 0));
  return out;
}

Image restore(const ParameterStore<float>& store, const Image& img) {
  ParameterStore<float> local = store;
  local.allow_create(false);
  const Network<float> net(local);
  const Index m = net.config().divisor();
  const Image padded = reflect_pad(img, m);
  return clamp_unit(crop(net.forward(padded), img.h(), img.w()));
}

MetricsReport evaluate(const ParameterStore<float>& store, const SampleSource& data,
                       Index per_weather) {
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  ParameterStore<float> local = store;
  local.allow_create(false);
  const Network<float> net(local);
  const Index m = net.config().divisor();
  MetricsReport report;
  report.config_hash = hash_string(store.config.serialize());
  for (Weather w : kWeathers) {
    auto idx = data.indices_of(w);
    if (idx.empty()) continue;
    if (per_weather > 0 && static_cast<Index>(idx.size()) > per_weather) idx.resize(per_weather);
    WeatherMetrics wm;
    for (Index i : idx) {
      const WeatherSample s = data.get(i);
      const Image out = clamp_unit(crop(net.forward(reflect_pad(s.degraded, m)), s.degraded.h(),
                                        s.degraded.w()));
      wm.psnr += psnr(out, s.clean);
      wm.ssim += ssim(out, s.clean);
      wm.input_psnr += psnr(s.degraded, s.clean);
      wm.input_ssim += ssim(s.degraded, s.clean);
      ++wm.count;
    }
    const double n = static_cast<double>(wm.count);
    wm.psnr /= n;
    wm.ssim /= n;
    wm.input_psnr /= n;
    wm.input_ssim /= n;
    report.per_weather[w] = wm;
  }
  return report;
}

}  // namespace ddcnet
