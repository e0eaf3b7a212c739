#include "ddcnet/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "ddcnet/rng.hpp"

namespace ddcnet {
namespace {

namespace fs = std::filesystem;

void require_image(const Image& img, const char* what) {
  require_rank4(img.dims(), what);
  if (img.n() != 1 || img.c() != 3) {
    throw ShapeError(std::string(what) + ": expected (1, H, W, 3), got " + img.shape_string());
  }
}

void require_range(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

// Number of items for a per-64x64 density on an h x w image.
Index scaled_count(double density, Index h, Index w) {
  return static_cast<Index>(std::lround(density * static_cast<double>(h * w) / 4096.0));
}

void fill_rect(Image& img, double cy, double cx, double hy, double hx, const double* color,
               double stripe_period, double stripe_angle, double stripe_amp) {
  const Index h = img.h(), w = img.w();
  const Index y0 = std::max<Index>(0, static_cast<Index>(std::floor(cy - hy)));
  const Index y1 = std::min<Index>(h - 1, static_cast<Index>(std::ceil(cy + hy)));
  const Index x0 = std::max<Index>(0, static_cast<Index>(std::floor(cx - hx)));
  const Index x1 = std::min<Index>(w - 1, static_cast<Index>(std::ceil(cx + hx)));
  const double ca = std::cos(stripe_angle), sa = std::sin(stripe_angle);
  for (Index y = y0; y <= y1; ++y) {
    for (Index x = x0; x <= x1; ++x) {
      if (std::abs(y - cy) > hy || std::abs(x - cx) > hx) continue;
      const double s =
          stripe_amp * std::sin(2.0 * M_PI * (ca * x + sa * y) / stripe_period);
      for (Index c = 0; c < 3; ++c) img(0, y, x, c) = static_cast<float>(color[c] + s);
    }
  }
}

void fill_ellipse(Image& img, double cy, double cx, double ry, double rx, const double* color,
                  double stripe_period, double stripe_angle, double stripe_amp) {
  const Index h = img.h(), w = img.w();
  const Index y0 = std::max<Index>(0, static_cast<Index>(std::floor(cy - ry)));
  const Index y1 = std::min<Index>(h - 1, static_cast<Index>(std::ceil(cy + ry)));
  const Index x0 = std::max<Index>(0, static_cast<Index>(std::floor(cx - rx)));
  const Index x1 = std::min<Index>(w - 1, static_cast<Index>(std::ceil(cx + rx)));
  const double ca = std::cos(stripe_angle), sa = std::sin(stripe_angle);
  for (Index y = y0; y <= y1; ++y) {
    for (Index x = x0; x <= x1; ++x) {
      const double dy = (y - cy) / ry, dx = (x - cx) / rx;
      if (dy * dy + dx * dx > 1.0) continue;
      const double s =
          stripe_amp * std::sin(2.0 * M_PI * (ca * x + sa * y) / stripe_period);
      for (Index c = 0; c < 3; ++c) img(0, y, x, c) = static_cast<float>(color[c] + s);
    }
  }
}

Image clipped(Image img) {
  img.values() = img.values().max(0.0f).min(1.0f);
  return img;
}

}  // namespace

std::string to_string(Weather w) {
  switch (w) {
    case Weather::Rain: return "rain";
    case Weather::Haze: return "haze";
    case Weather::Snow: return "snow";
  }
  return "unknown";
}

Weather parse_weather(const std::string& name) {
  if (name == "rain") return Weather::Rain;
  if (name == "haze") return Weather::Haze;
  if (name == "snow") return Weather::Snow;
  throw ConfigError("unknown weather '" + name + "' (expected rain, haze or snow)");
}

void RainParams::validate() const {
  require_range(density >= 0, "rain.density must be >= 0");
  require_range(length_min > 0 && length_min <= length_max, "rain.length range invalid");
  require_range(angle_min <= angle_max && angle_min >= -89 && angle_max <= 89,
                "rain.angle range must lie within (-90, 90) degrees");
  require_range(width > 0, "rain.width must be positive");
  require_range(intensity_min >= 0 && intensity_min <= intensity_max && intensity_max <= 1,
                "rain.intensity range must lie within [0, 1]");
}

void HazeParams::validate() const {
  require_range(t_min > 0 && t_min <= t_max && t_max <= 1, "haze transmission must lie in (0, 1]");
  require_range(airlight_min >= 0.6 && airlight_min <= airlight_max && airlight_max <= 1.0,
                "haze.airlight range must lie within [0.6, 1]");
}

void SnowParams::validate() const {
  require_range(density >= 0, "snow.density must be >= 0");
  require_range(radius_min > 0 && radius_min <= radius_max, "snow.radius range invalid");
  require_range(opacity_min >= 0 && opacity_min <= opacity_max && opacity_max <= 1,
                "snow.opacity range must lie within [0, 1]");
  require_range(color >= 0 && color <= 1, "snow.color must lie within [0, 1]");
}

void DegradeParams::validate() const {
  rain.validate();
  haze.validate();
  snow.validate();
}

Image make_scene(Index height, Index width, std::uint64_t seed) {
  if (height < 1 || width < 1) throw ConfigError("make_scene: empty size");
  Rng rng(seed);
  Image img(1, height, width, 3);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.1, 0.9);
    c1[c] = rng.uniform(0.1, 0.9);
  }
  const double theta = rng.uniform(0, 2 * M_PI);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double span = static_cast<double>(std::max(height, width));
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      const double t = std::clamp(
          0.5 + ((x - 0.5 * width) * ct + (y - 0.5 * height) * st) / span, 0.0, 1.0);
      for (Index c = 0; c < 3; ++c) img(0, y, x, c) = static_cast<float>(c0[c] + (c1[c] - c0[c]) * t);
    }
  }

  const Index shapes = 7 + static_cast<Index>(rng.below(4));
  for (Index k = 0; k < shapes; ++k) {
    const auto kind = rng.below(2);
    const double cy = rng.uniform(0, height), cx = rng.uniform(0, width);
    const double hy = rng.uniform(0.06, 0.3) * height, hx = rng.uniform(0.06, 0.3) * width;
    double color[3];
    for (double& v : color) v = rng.uniform(0.05, 0.95);
    const bool textured = rng.uniform() < 0.5;
    const double period = rng.uniform(3.0, 10.0);
    const double angle = rng.uniform(0, M_PI);
    const double amp = textured ? rng.uniform(0.05, 0.2) : 0.0;
    if (kind == 0) {
      fill_rect(img, cy, cx, hy, hx, color, period, angle, amp);
    } else {
      fill_ellipse(img, cy, cx, hy, hx, color, period, angle, amp);
    }
  }
  // Fine grain so every scene carries some energy up to the Nyquist band.
  for (Index i = 0; i < img.size(); ++i) img.values()[i] += static_cast<float>(0.015 * rng.normal());
  return clipped(std::move(img));
}

WeatherSample gen_rain(const Image& clean, const RainParams& p, std::uint64_t seed) {
  require_image(clean, "gen_rain");
  p.validate();
  Rng rng(seed);
  const Index h = clean.h(), w = clean.w();
  const Index count = scaled_count(p.density, h, w);
  std::vector<float> layer(static_cast<std::size_t>(h * w), 0.0f);
  // One dominant direction per image, small per-streak jitter.
  const double base = rng.uniform(p.angle_min, p.angle_max);
  const double reach = 3.0 * p.width;
  for (Index k = 0; k < count; ++k) {
    const double angle =
        std::clamp(base + rng.uniform(-3.0, 3.0), p.angle_min, p.angle_max) * M_PI / 180.0;
    const double dx = std::sin(angle), dy = std::cos(angle);
    const double len = rng.uniform(p.length_min, p.length_max);
    const double cy = rng.uniform(0, h), cx = rng.uniform(0, w);
    const double amp = rng.uniform(p.intensity_min, p.intensity_max);
    const double half = 0.5 * len;
    const double ext_y = std::abs(dy) * half + reach, ext_x = std::abs(dx) * half + reach;
    const Index y0 = std::max<Index>(0, static_cast<Index>(std::floor(cy - ext_y)));
    const Index y1 = std::min<Index>(h - 1, static_cast<Index>(std::ceil(cy + ext_y)));
    const Index x0 = std::max<Index>(0, static_cast<Index>(std::floor(cx - ext_x)));
    const Index x1 = std::min<Index>(w - 1, static_cast<Index>(std::ceil(cx + ext_x)));
    const double inv = 1.0 / (2.0 * p.width * p.width);
    for (Index y = y0; y <= y1; ++y) {
      for (Index x = x0; x <= x1; ++x) {
        const double ry = y - cy, rx = x - cx;
        const double along = std::clamp(ry * dy + rx * dx, -half, half);
        const double py = ry - along * dy, px = rx - along * dx;
        const double d2 = py * py + px * px;
        if (d2 > reach * reach) continue;
        layer[static_cast<std::size_t>(y * w + x)] += static_cast<float>(amp * std::exp(-d2 * inv));
      }
    }
  }
  WeatherSample s{clean, clean, Weather::Rain, seed};
  for (Index i = 0; i < h * w; ++i) {
    for (Index c = 0; c < 3; ++c) s.degraded.values()[i * 3 + c] += layer[static_cast<std::size_t>(i)];
  }
  s.degraded = clipped(std::move(s.degraded));
  return s;
}

Image apply_haze(const Image& clean, const Tensor<float>& transmission, double airlight) {
  require_image(clean, "apply_haze");
  if (transmission.n() != 1 || transmission.h() != clean.h() || transmission.w() != clean.w() ||
      transmission.c() != 1) {
    throw ShapeError("apply_haze: transmission must be (1, H, W, 1)");
  }
  if (!((transmission.values() > 0.0f).all() && (transmission.values() <= 1.0f).all())) {
    throw ConfigError("apply_haze: transmission must lie in (0, 1]");
  }
  Image out(clean.dims());
  const float a = static_cast<float>(airlight);
  for (Index i = 0; i < transmission.size(); ++i) {
    const float t = transmission.values()[i];
    for (Index c = 0; c < 3; ++c) {
      out.values()[i * 3 + c] = clean.values()[i * 3 + c] * t + a * (1.0f - t);
    }
  }
  return clipped(std::move(out));
}

WeatherSample gen_haze(const Image& clean, const HazeParams& p, std::uint64_t seed) {
  require_image(clean, "gen_haze");
  p.validate();
  Rng rng(seed);
  const Index h = clean.h(), w = clean.w();
  const double airlight = rng.uniform(p.airlight_min, p.airlight_max);
  // Depth ramp in a random direction with a gentle low-frequency wobble.
  const double theta = rng.uniform(0, 2 * M_PI);
  const double ct = std::cos(theta), st = std::sin(theta);
  const double wobble_phase = rng.uniform(0, 2 * M_PI);
  const double wobble_angle = rng.uniform(0, 2 * M_PI);
  const double span = static_cast<double>(std::max(h, w));
  Tensor<float> t(1, h, w, 1);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const double ramp = 0.5 + ((x - 0.5 * w) * ct + (y - 0.5 * h) * st) / (1.5 * span);
      const double wobble =
          0.1 * std::sin(2 * M_PI * (x * std::cos(wobble_angle) + y * std::sin(wobble_angle)) /
                             span + wobble_phase);
      const double depth = std::clamp(ramp + wobble, 0.0, 1.0);
      t(0, y, x, 0) = static_cast<float>(p.t_max - (p.t_max - p.t_min) * depth);
    }
  }
  return WeatherSample{apply_haze(clean, t, airlight), clean, Weather::Haze, seed};
}

void composite_flake(Image& img, double cy, double cx, double radius, double opacity,
                     double color) {
  const Index h = img.h(), w = img.w();
  const Index y0 = std::max<Index>(0, static_cast<Index>(std::floor(cy - radius - 1)));
  const Index y1 = std::min<Index>(h - 1, static_cast<Index>(std::ceil(cy + radius + 1)));
  const Index x0 = std::max<Index>(0, static_cast<Index>(std::floor(cx - radius - 1)));
  const Index x1 = std::min<Index>(w - 1, static_cast<Index>(std::ceil(cx + radius + 1)));
  for (Index y = y0; y <= y1; ++y) {
    for (Index x = x0; x <= x1; ++x) {
      const double d = std::hypot(y - cy, x - cx);
      double alpha;
      if (d <= radius) {
        alpha = opacity;
      } else if (d < radius + 1) {
        alpha = opacity * (radius + 1 - d);
      } else {
        continue;
      }
      for (Index c = 0; c < 3; ++c) {
        float& v = img(0, y, x, c);
        v = static_cast<float>(alpha * color + (1.0 - alpha) * v);
      }
    }
  }
}

WeatherSample gen_snow(const Image& clean, const SnowParams& p, std::uint64_t seed) {
  require_image(clean, "gen_snow");
  p.validate();
  Rng rng(seed);
  const Index h = clean.h(), w = clean.w();
  const Index count = scaled_count(p.density, h, w);
  WeatherSample s{clean, clean, Weather::Snow, seed};
  for (Index k = 0; k < count; ++k) {
    const double cy = rng.uniform(0, h), cx = rng.uniform(0, w);
    // Small flakes dominate.
    const double u = rng.uniform();
    const double radius = p.radius_min + (p.radius_max - p.radius_min) * u * u;
    const double opacity = rng.uniform(p.opacity_min, p.opacity_max);
    composite_flake(s.degraded, cy, cx, radius, opacity, p.color);
  }
  s.degraded = clipped(std::move(s.degraded));
  return s;
}

WeatherSample degrade(const Image& clean, Weather w, const DegradeParams& p, std::uint64_t seed) {
  switch (w) {
    case Weather::Rain: return gen_rain(clean, p.rain, seed);
    case Weather::Haze: return gen_haze(clean, p.haze, seed);
    case Weather::Snow: return gen_snow(clean, p.snow, seed);
  }
  throw ConfigError("degrade: bad weather");
}

std::uint64_t sample_seed(std::uint64_t master_seed, Index index, Weather w) {
  return derive_seed({master_seed, static_cast<std::uint64_t>(index),
                      static_cast<std::uint64_t>(w) + 1});
}

std::vector<Index> SampleSource::indices_of(Weather w) const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if (weather_of(i) == w) out.push_back(i);
  return out;
}

SyntheticSource::SyntheticSource(Index n_per_weather, Index image_size, DegradeParams params,
                                 std::uint64_t master_seed)
    : n_(n_per_weather), size_(image_size), params_(params), master_(master_seed) {
  if (n_ < 1) throw ConfigError("dataset needs at least one sample per weather");
  if (size_ < 8) throw ConfigError("dataset image size must be at least 8");
  params_.validate();
}

WeatherSample SyntheticSource::get(Index i) const {
  if (i < 0 || i >= size()) throw DataError("sample index out of range");
  const Weather w = weather_of(i);
  const std::uint64_t seed = sample_seed(master_, i % n_, w);
  const Image clean = make_scene(size_, size_, derive_seed({seed, hash_string("scene")}));
  return degrade(clean, w, params_, seed);
}

std::vector<WeatherSample> make_dataset(Index n_per_weather, Index image_size,
                                        const DegradeParams& params, std::uint64_t master_seed) {
  SyntheticSource source(n_per_weather, image_size, params, master_seed);
  std::vector<WeatherSample> out;
  out.reserve(static_cast<std::size_t>(source.size()));
  for (Index i = 0; i < source.size(); ++i) out.push_back(source.get(i));
  return out;
}

std::uint64_t image_hash(const Image& img) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(img.data());
  for (std::size_t i = 0; i < sizeof(float) * static_cast<std::size_t>(img.size()); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

MemorySource load_folder(const std::string& root) {
  if (!fs::is_directory(root)) throw DataError("data folder not found: " + root);
  std::vector<WeatherSample> samples;
  for (Weather w : kWeathers) {
    const fs::path dir = fs::path(root) / to_string(w);
    if (!fs::is_directory(dir)) continue;
    const fs::path in_dir = dir / "input", gt_dir = dir / "gt";
    if (!fs::is_directory(in_dir) || !fs::is_directory(gt_dir)) {
      throw DataError(dir.string() + " must contain input/ and gt/");
    }
    std::vector<fs::path> inputs;
    for (const auto& e : fs::directory_iterator(in_dir))
      if (e.is_regular_file() && e.path().extension() == ".png") inputs.push_back(e.path());
    std::sort(inputs.begin(), inputs.end());
    for (const auto& in : inputs) {
      const fs::path gt = gt_dir / in.filename();
      if (!fs::exists(gt)) throw DataError("no ground truth for " + in.string());
      WeatherSample s{read_png(in.string()), read_png(gt.string()), w,
                      hash_string(in.filename().string())};
      if (!s.degraded.same_shape(s.clean)) throw DataError("size mismatch for " + in.string());
      samples.push_back(std::move(s));
    }
  }
  if (samples.empty()) throw DataError("no image pairs under " + root);
  return MemorySource(std::move(samples));
}

void write_dataset(const std::string& root, const std::vector<WeatherSample>& samples) {
  nlohmann::json manifest = nlohmann::json::array();
  std::map<Weather, Index> counters;
  for (const auto& s : samples) {
    const std::string tag = to_string(s.weather);
    const fs::path dir = fs::path(root) / tag;
    fs::create_directories(dir / "input");
    fs::create_directories(dir / "gt");
    char name[32];
    std::snprintf(name, sizeof name, "%05ld.png", static_cast<long>(counters[s.weather]++));
    const fs::path in = dir / "input" / name, gt = dir / "gt" / name;
    write_png(in.string(), s.degraded);
    write_png(gt.string(), s.clean);
    manifest.push_back({{"weather", tag},
                        {"seed", s.seed},
                        {"input", fs::relative(in, root).string()},
                        {"gt", fs::relative(gt, root).string()}});
  }
  std::ofstream out(fs::path(root) / "manifest.json");
  if (!out) throw DataError("cannot write manifest under " + root);
  out << manifest.dump(2) << '\n';
}

Batch sample_batch(const SampleSource& source, Index batch, Index patch, std::uint64_t seed) {
  if (batch < 1) throw ConfigError("batch size must be positive");
  if (patch < 8 || patch % 8 != 0) throw ConfigError("patch size must be a positive multiple of 8");
  std::vector<std::vector<Index>> pools;
  for (Weather w : kWeathers) {
    auto pool = source.indices_of(w);
    if (!pool.empty()) pools.push_back(std::move(pool));
  }
  if (pools.empty()) throw DataError("sample_batch: empty source");

  Rng rng(seed);
  Batch out{Tensor<float>(batch, patch, patch, 3), Tensor<float>(batch, patch, patch, 3), {}, {}};
  for (Index b = 0; b < batch; ++b) {
    const auto& pool = pools[rng.below(pools.size())];
    const Index idx = pool[rng.below(pool.size())];
    const WeatherSample s = source.get(idx);
    if (s.degraded.h() < patch || s.degraded.w() < patch) {
      throw DataError("patch " + std::to_string(patch) + " exceeds image " +
                      s.degraded.shape_string());
    }
    const Index oy = static_cast<Index>(rng.below(static_cast<std::uint64_t>(s.degraded.h() - patch + 1)));
    const Index ox = static_cast<Index>(rng.below(static_cast<std::uint64_t>(s.degraded.w() - patch + 1)));
    for (Index y = 0; y < patch; ++y) {
      std::copy_n(&s.degraded(0, oy + y, ox, 0), patch * 3, &out.inp(b, y, 0, 0));
      std::copy_n(&s.clean(0, oy + y, ox, 0), patch * 3, &out.gt(b, y, 0, 0));
    }
    out.tags.push_back(s.weather);
    out.indices.push_back(idx);
  }
  return out;
}

}  // namespace ddcnet
