#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ddcnet/image_io.hpp"

namespace ddcnet {

enum class Weather { Rain = 0, Haze = 1, Snow = 2 };

inline constexpr std::array<Weather, 3> kWeathers = {Weather::Rain, Weather::Haze, Weather::Snow};

std::string to_string(Weather w);
// Throws ConfigError on an unknown name.
Weather parse_weather(const std::string& name);

struct WeatherSample {
  Image degraded;
  Image clean;
  Weather weather = Weather::Rain;
  std::uint64_t seed = 0;
};

// Additive bright streaks: each is a segment with a Gaussian cross-section.
// Density is streaks per 64x64 area; angle is measured from vertical.
struct RainParams {
  double density = 70.0;
  double length_min = 6.0, length_max = 18.0;
  double angle_min = -25.0, angle_max = 25.0;  // degrees
  double width = 0.4;                           // Gaussian sigma, pixels
  double intensity_min = 0.3, intensity_max = 0.6;

  void validate() const;
  bool operator==(const RainParams&) const = default;
};

// I = J * t + a * (1 - t). The transmission follows a smooth depth ramp in
// a random direction, spanning [t_min, t_max]; airlight a is drawn per image.
struct HazeParams {
  double t_min = 0.35, t_max = 0.6;
  double airlight_min = 0.75, airlight_max = 0.95;

  void validate() const;
  bool operator==(const HazeParams&) const = default;
};

// Alpha-composited near-white discs with a one-pixel soft rim.
struct SnowParams {
  double density = 10.0;  // flakes per 64x64 area
  double radius_min = 1.5, radius_max = 4.0;
  double opacity_min = 0.6, opacity_max = 1.0;
  double color = 0.95;

  void validate() const;
  bool operator==(const SnowParams&) const = default;
};

struct DegradeParams {
  RainParams rain;
  HazeParams haze;
  SnowParams snow;

  void validate() const;
  bool operator==(const DegradeParams&) const = default;
};

// Seeded procedural scene: gradient background, flat and textured shapes.
Image make_scene(Index height, Index width, std::uint64_t seed);

WeatherSample gen_rain(const Image& clean, const RainParams& p, std::uint64_t seed);
WeatherSample gen_haze(const Image& clean, const HazeParams& p, std::uint64_t seed);
WeatherSample gen_snow(const Image& clean, const SnowParams& p, std::uint64_t seed);
WeatherSample degrade(const Image& clean, Weather w, const DegradeParams& p, std::uint64_t seed);

// Haze with a fixed transmission map value and airlight.
Image apply_haze(const Image& clean, const Tensor<float>& transmission, double airlight);

// Composites one flake; pixels within `radius` of the centre take
// color * opacity + (1 - opacity) * pixel exactly.
void composite_flake(Image& img, double cy, double cx, double radius, double opacity,
                     double color);

// Per-sample seeds and scenes derive from (master seed, index, weather).
std::uint64_t sample_seed(std::uint64_t master_seed, Index index, Weather w);

// Random-access paired data. Index layout is weather-major: all rain
// samples, then haze, then snow.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual Index size() const = 0;
  virtual WeatherSample get(Index i) const = 0;
  virtual Weather weather_of(Index i) const = 0;
  // Indices belonging to one weather.
  std::vector<Index> indices_of(Weather w) const;
};

// Generates each sample on demand; memory stays constant for any n.
class SyntheticSource : public SampleSource {
 public:
  SyntheticSource(Index n_per_weather, Index image_size, DegradeParams params,
                  std::uint64_t master_seed);

  Index size() const override { return 3 * n_; }
  WeatherSample get(Index i) const override;
  Weather weather_of(Index i) const override { return kWeathers[static_cast<std::size_t>(i / n_)]; }

  Index per_weather() const { return n_; }
  Index image_size() const { return size_; }
  std::uint64_t master_seed() const { return master_; }

 private:
  Index n_;
  Index size_;
  DegradeParams params_;
  std::uint64_t master_;
};

class MemorySource : public SampleSource {
 public:
  explicit MemorySource(std::vector<WeatherSample> samples) : samples_(std::move(samples)) {}
  Index size() const override { return static_cast<Index>(samples_.size()); }
  WeatherSample get(Index i) const override { return samples_.at(static_cast<std::size_t>(i)); }
  Weather weather_of(Index i) const override {
    return samples_.at(static_cast<std::size_t>(i)).weather;
  }
  const std::vector<WeatherSample>& samples() const { return samples_; }

 private:
  std::vector<WeatherSample> samples_;
};

std::vector<WeatherSample> make_dataset(Index n_per_weather, Index image_size,
                                        const DegradeParams& params, std::uint64_t master_seed);

// Loads <root>/<weather>/{input,gt}/<name>.png, pairing files by name.
// Throws DataError when the tree is malformed or empty.
MemorySource load_folder(const std::string& root);

// Writes samples as PNG in the folder layout plus a manifest.json index.
void write_dataset(const std::string& root, const std::vector<WeatherSample>& samples);

// FNV-1a over the bytes of the degraded image.
std::uint64_t image_hash(const Image& img);

struct Batch {
  Tensor<float> inp;  // (B, patch, patch, 3)
  Tensor<float> gt;
  std::vector<Weather> tags;
  std::vector<Index> indices;
};

// Draws each item's weather uniformly, then a sample of that weather
// uniformly with replacement, then one crop shared by input and target.
// The patch must fit every image and be a multiple of 8.
Batch sample_batch(const SampleSource& source, Index batch, Index patch, std::uint64_t seed);

}  // namespace ddcnet
