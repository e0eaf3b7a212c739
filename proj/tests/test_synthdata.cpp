#include <gtest/gtest.h>

#include <filesystem>
#include <set>
#include <thread>

#include "ddcnet/analysis.hpp"
#include "ddcnet/errors.hpp"
#include "ddcnet/image_io.hpp"
#include "ddcnet/metrics.hpp"
#include "ddcnet/spectral.hpp"
#include "ddcnet/synthdata.hpp"

namespace ddcnet {
namespace {

namespace fs = std::filesystem;

bool equal(const Image& a, const Image& b) {
  return a.same_shape(b) && (a.values() == b.values()).all();
}

bool in_unit_range(const Image& img) {
  return (img.values() >= 0.0f).all() && (img.values() <= 1.0f).all();
}

Image scene(std::uint64_t seed, Index size = 64) { return make_scene(size, size, seed); }

double channel_std(const Image& img, Index c) {
  double sum = 0, sq = 0;
  const Index n = img.h() * img.w();
  for (Index i = 0; i < n; ++i) {
    const double v = img.values()[i * 3 + c];
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  return std::sqrt(std::max(0.0, sq / n - mean * mean));
}

// Sum of luma amplitude outside the lowest eighth of the radial range.
double high_frequency_energy(const Image& img) {
  const Index h = img.h(), w = img.w();
  Tensor<double> plane(1, h, w, 1);
  const auto y = luma(img);
  for (Index i = 0; i < h * w; ++i) plane.values()[i] = y[static_cast<std::size_t>(i)];
  const Tensor<double> amp = amplitude(fft2(plane));
  double total = 0;
  for (Index u = 0; u < h; ++u) {
    for (Index v = 0; v < w; ++v) {
      const double fu = static_cast<double>(std::min(u, h - u)) / h;
      const double fv = static_cast<double>(std::min(v, w - v)) / w;
      if (std::hypot(fu, fv) > 0.5 / 8) total += amp(0, u, v, 0);
    }
  }
  return total;
}

TEST(Synthdata, NullParametersAreIdentity) {
  const Image clean = scene(1);
  RainParams rain;
  rain.density = 0;
  SnowParams snow;
  snow.density = 0;
  HazeParams haze;
  haze.t_min = haze.t_max = 1.0;
  EXPECT_TRUE(equal(gen_rain(clean, rain, 5).degraded, clean));
  EXPECT_TRUE(equal(gen_snow(clean, snow, 5).degraded, clean));
  EXPECT_TRUE(equal(gen_haze(clean, haze, 5).degraded, clean));
  EXPECT_TRUE(equal(apply_haze(clean, Tensor<float>(1, 64, 64, 1, 1.0f), 0.8), clean));
}

TEST(Synthdata, GeneratorsAreDeterministicAndInRange) {
  const DegradeParams p;
  for (Weather w : kWeathers) {
    for (std::uint64_t seed : {1u, 2u, 77u}) {
      const Image clean = scene(seed + 100);
      const WeatherSample a = degrade(clean, w, p, seed);
      const WeatherSample b = degrade(clean, w, p, seed);
      EXPECT_TRUE(equal(a.degraded, b.degraded)) << to_string(w);
      EXPECT_TRUE(equal(a.clean, clean));
      EXPECT_EQ(a.weather, w);
      EXPECT_TRUE(in_unit_range(a.degraded)) << to_string(w);
      EXPECT_FALSE(equal(a.degraded, degrade(clean, w, p, seed + 1000).degraded)) << to_string(w);
    }
  }
  EXPECT_TRUE(equal(scene(9), scene(9)));
  EXPECT_TRUE(in_unit_range(scene(9)));
}

TEST(Synthdata, RainOnlyAddsLight) {
  const RainParams p;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Image clean = scene(seed + 500);
    const WeatherSample s = gen_rain(clean, p, seed);
    EXPECT_GE(s.degraded.values().mean(), clean.values().mean()) << seed;
    EXPECT_TRUE((s.degraded.values() >= clean.values()).all()) << seed;
  }
}

TEST(Synthdata, HazeClosedFormAndContrast) {
  const Image black(1, 16, 16, 3, 0.0f);
  const Image half = apply_haze(black, Tensor<float>(1, 16, 16, 1, 0.5f), 1.0);
  EXPECT_TRUE((half.values() == 0.5f).all());

  const HazeParams p;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Image clean = scene(seed + 900);
    const WeatherSample s = gen_haze(clean, p, seed);
    for (Index c = 0; c < 3; ++c) {
      EXPECT_LE(channel_std(s.degraded, c), channel_std(clean, c) + 1e-6) << seed << ' ' << c;
    }
  }
}

TEST(Synthdata, HazeRejectsBadTransmission) {
  const Image clean = scene(3, 16);
  EXPECT_THROW(apply_haze(clean, Tensor<float>(1, 16, 16, 1, 0.0f), 0.8), ConfigError);
  EXPECT_THROW(apply_haze(clean, Tensor<float>(1, 16, 16, 1, 1.5f), 0.8), ConfigError);
  EXPECT_THROW(apply_haze(clean, Tensor<float>(1, 8, 16, 1, 0.5f), 0.8), ShapeError);
  HazeParams bad;
  bad.t_min = 0.0;
  EXPECT_THROW(gen_haze(clean, bad, 1), ConfigError);
  HazeParams dim;
  dim.airlight_min = 0.3;
  EXPECT_THROW(gen_haze(clean, dim, 1), ConfigError);
}

TEST(Synthdata, InvalidParamsThrow) {
  const Image clean = scene(4, 16);
  RainParams rain;
  rain.density = -1;
  EXPECT_THROW(gen_rain(clean, rain, 1), ConfigError);
  rain = {};
  rain.length_min = 20;
  rain.length_max = 10;
  EXPECT_THROW(gen_rain(clean, rain, 1), ConfigError);
  SnowParams snow;
  snow.opacity_max = 1.5;
  EXPECT_THROW(gen_snow(clean, snow, 1), ConfigError);
  snow = {};
  snow.radius_min = 0;
  EXPECT_THROW(gen_snow(clean, snow, 1), ConfigError);
}

TEST(Synthdata, OpaqueFlakeTakesItsColourExactly) {
  Image img = scene(12, 32);
  const Image before = img;
  composite_flake(img, 15.5, 10.25, 3.0, 1.0, 0.95);
  for (Index y = 0; y < 32; ++y) {
    for (Index x = 0; x < 32; ++x) {
      const double d = std::hypot(y - 15.5, x - 10.25);
      for (Index c = 0; c < 3; ++c) {
        if (d <= 3.0) {
          EXPECT_EQ(img(0, y, x, c), 0.95f);
        } else if (d >= 4.0) {
          EXPECT_EQ(img(0, y, x, c), before(0, y, x, c));
        }
      }
    }
  }
}

TEST(Synthdata, SnowAddsHighFrequencyEnergy) {
  const SnowParams p;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Image clean = scene(seed + 1300);
    const WeatherSample s = gen_snow(clean, p, seed);
    EXPECT_GT(high_frequency_energy(s.degraded), high_frequency_energy(clean)) << seed;
  }
}

TEST(Synthdata, MakeDatasetCountsAndDeterminism) {
  const DegradeParams p;
  const auto a = make_dataset(10, 32, p, 42);
  ASSERT_EQ(a.size(), 30u);
  for (Weather w : kWeathers) {
    EXPECT_EQ(std::count_if(a.begin(), a.end(), [&](const auto& s) { return s.weather == w; }), 10);
  }
  const auto b = make_dataset(10, 32, p, 42);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].weather, b[i].weather);
    EXPECT_EQ(a[i].seed, b[i].seed);
    EXPECT_TRUE(equal(a[i].degraded, b[i].degraded));
    EXPECT_TRUE(equal(a[i].clean, b[i].clean));
  }
  EXPECT_THROW(make_dataset(0, 32, p, 42), ConfigError);
}

TEST(Synthdata, DisjointSeedsGiveDistinctImages) {
  const DegradeParams p;
  std::set<std::uint64_t> hashes;
  for (std::uint64_t master : {1u, 2u}) {
    for (const auto& s : make_dataset(20, 32, p, master)) {
      EXPECT_TRUE(hashes.insert(image_hash(s.degraded)).second);
    }
  }
  EXPECT_EQ(hashes.size(), 120u);
}

TEST(Synthdata, ParallelGenerationMatchesSerial) {
  const DegradeParams p;
  const SyntheticSource source(8, 32, p, 7);
  const auto serial = make_dataset(8, 32, p, 7);
  std::vector<WeatherSample> parallel(serial.size());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      // Each thread walks its share backwards to shuffle the order.
      for (Index i = source.size() - 1 - t; i >= 0; i -= 4) {
        parallel[static_cast<std::size_t>(i)] = source.get(i);
      }
    });
  }
  for (auto& th : threads) th.join();
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_TRUE(equal(serial[i].degraded, parallel[i].degraded)) << i;
  }
}

TEST(Synthdata, SampleBatchShapesAndTags) {
  const SyntheticSource source(10, 32, DegradeParams{}, 3);
  const Batch b = sample_batch(source, 32, 16, 11);
  EXPECT_EQ(b.inp.dims(), (std::vector<Index>{32, 16, 16, 3}));
  EXPECT_EQ(b.gt.dims(), b.inp.dims());
  ASSERT_EQ(b.tags.size(), 32u);
  for (std::size_t i = 0; i < b.tags.size(); ++i) {
    EXPECT_EQ(b.tags[i], source.weather_of(b.indices[i]));
  }
  const Batch again = sample_batch(source, 32, 16, 11);
  EXPECT_TRUE(equal(b.inp, again.inp));
  EXPECT_EQ(b.indices, again.indices);
}

TEST(Synthdata, FullSizePatchIsIdentityCrop) {
  const SyntheticSource source(2, 32, DegradeParams{}, 5);
  const Batch b = sample_batch(source, 4, 32, 1);
  for (Index i = 0; i < 4; ++i) {
    const WeatherSample s = source.get(b.indices[static_cast<std::size_t>(i)]);
    EXPECT_TRUE(equal(batch_item(b.inp, i), s.degraded));
    EXPECT_TRUE(equal(batch_item(b.gt, i), s.clean));
  }
}

TEST(Synthdata, CropsAreColocated) {
  // With no degradation the input crop must equal the target crop.
  DegradeParams none;
  none.rain.density = 0;
  none.snow.density = 0;
  none.haze.t_min = none.haze.t_max = 1.0;
  const SyntheticSource source(5, 48, none, 9);
  const Batch b = sample_batch(source, 16, 24, 2);
  EXPECT_TRUE(equal(b.inp, b.gt));
  // And the crop is a real window of the clean image.
  const WeatherSample s = source.get(b.indices[0]);
  bool found = false;
  for (Index oy = 0; oy + 24 <= 48 && !found; ++oy) {
    for (Index ox = 0; ox + 24 <= 48 && !found; ++ox) {
      bool match = true;
      for (Index y = 0; y < 24 && match; ++y)
        for (Index x = 0; x < 24 && match; ++x)
          for (Index c = 0; c < 3; ++c)
            match = match && b.gt(0, y, x, c) == s.clean(0, oy + y, ox + x, c);
      found = match;
    }
  }
  EXPECT_TRUE(found);
}

TEST(Synthdata, BatchLargerThanDatasetSamplesWithReplacement) {
  const MemorySource source(make_dataset(10, 16, DegradeParams{}, 4));
  const Batch b = sample_batch(source, 32, 16, 8);
  EXPECT_EQ(b.inp.n(), 32);
  std::set<Index> distinct(b.indices.begin(), b.indices.end());
  EXPECT_LT(distinct.size(), 32u);
}

TEST(Synthdata, SampleBatchErrors) {
  const SyntheticSource source(2, 32, DegradeParams{}, 5);
  EXPECT_THROW(sample_batch(source, 2, 12, 1), ConfigError);
  EXPECT_THROW(sample_batch(source, 2, 40, 1), DataError);
  EXPECT_THROW(sample_batch(source, 0, 16, 1), ConfigError);
  EXPECT_THROW(sample_batch(MemorySource({}), 2, 16, 1), DataError);
}

TEST(Synthdata, FolderRoundTrip) {
  const fs::path root = fs::temp_directory_path() / "ddcnet_folder_test";
  fs::remove_all(root);
  const auto samples = make_dataset(3, 24, DegradeParams{}, 6);
  write_dataset(root.string(), samples);
  EXPECT_TRUE(fs::exists(root / "manifest.json"));
  const MemorySource back = load_folder(root.string());
  ASSERT_EQ(back.size(), 9);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const WeatherSample& s = back.samples()[i];
    EXPECT_EQ(s.weather, samples[i].weather);
    // 8-bit storage quantizes to within half a level.
    EXPECT_LE((s.degraded.values() - samples[i].degraded.values()).abs().maxCoeff(), 0.5f / 255 + 1e-6f);
    EXPECT_LE((s.clean.values() - samples[i].clean.values()).abs().maxCoeff(), 0.5f / 255 + 1e-6f);
  }
  fs::remove(root / "snow" / "gt" / "00001.png");
  EXPECT_THROW(load_folder(root.string()), DataError);
  fs::remove_all(root);
  EXPECT_THROW(load_folder(root.string()), DataError);
}

TEST(Synthdata, WeatherClassesAreSeparatedInAmplitude) {
  const SyntheticSource source(100, 100, DegradeParams{}, 2024);
  std::vector<std::vector<double>> profiles;
  std::vector<int> labels;
  for (Index i = 0; i < source.size(); ++i) {
    const WeatherSample s = source.get(i);
    profiles.push_back(radial_log_amplitude(s.degraded));
    labels.push_back(static_cast<int>(s.weather));
  }
  const ClassStats stats = class_stats(profiles, labels, 3);
  EXPECT_GT(stats.min_mean_distance(), stats.max_spread());
}

TEST(Synthdata, WeatherNames) {
  for (Weather w : kWeathers) EXPECT_EQ(parse_weather(to_string(w)), w);
  EXPECT_THROW(parse_weather("fog"), ConfigError);
}

}  // namespace
}  // namespace ddcnet
