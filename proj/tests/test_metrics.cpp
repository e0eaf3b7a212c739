#include <gtest/gtest.h>

#include <cmath>

#include <json.hpp>

#include "ddcnet/metrics.hpp"
#include "test_support.hpp"

namespace ddcnet {
namespace {

Image random_image(Index h, Index w, std::uint64_t seed) {
  return testing::random_tensor<float>({1, h, w, 3}, seed, 0.0, 1.0);
}

// Direct 2-D windowed SSIM, straight from the definition.
double brute_ssim(const Image& a, const Image& b) {
  const Index h = a.h(), w = a.w();
  const auto ya = luma(a), yb = luma(b);
  double g[11][11], gsum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) gsum += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  Index count = 0;
  for (Index y = 0; y + 11 <= h; ++y) {
    for (Index x = 0; x + 11 <= w; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i) {
        for (int j = 0; j < 11; ++j) {
          const double wt = g[i][j] / gsum;
          const double va = ya[static_cast<std::size_t>((y + i) * w + x + j)];
          const double vb = yb[static_cast<std::size_t>((y + i) * w + x + j)];
          ma += wt * va;
          mb += wt * vb;
          saa += wt * va * va;
          sbb += wt * vb * vb;
          sab += wt * va * vb;
        }
      }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

TEST(Psnr, IdenticalImagesHitTheCap) {
  const Image a = random_image(8, 8, 1);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_EQ(kPsnrCap, 100.0);
}

TEST(Psnr, UniformOffsetOfOneTenthIsTwentyDb) {
  const Image a(1, 16, 16, 3, 0.3f);
  Image b = a;
  b.values() += 0.1f;
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-5);
}

TEST(Psnr, IsSymmetric) {
  const Image a = random_image(12, 9, 2), b = random_image(12, 9, 3);
  EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  const Image clean = random_image(32, 32, 4);
  const auto noise = testing::random_tensor<float>({1, 32, 32, 3}, 5, -1.0, 1.0);
  double prev = kPsnrCap;
  for (float amp : {0.01f, 0.02f, 0.05f, 0.1f, 0.2f}) {
    Image noisy = clean;
    noisy.values() += amp * noise.values();
    const double p = psnr(clean, noisy);
    EXPECT_LT(p, prev) << amp;
    prev = p;
  }
}

TEST(Psnr, ShapeMismatchThrows) {
  EXPECT_THROW(psnr(random_image(8, 8, 1), random_image(8, 9, 1)), ShapeError);
}

TEST(Ssim, MatchesDirectWindowedEvaluation) {
  const Image a = random_image(24, 19, 6);
  Image b = a;
  b.values() = (0.7f * a.values() + 0.3f * random_image(24, 19, 7).values());
  EXPECT_NEAR(ssim(a, b), brute_ssim(a, b), 1e-12);
}

TEST(Ssim, IdentityIsOne) {
  for (std::uint64_t seed : {8u, 9u, 10u}) {
    const Image a = random_image(16, 20, seed);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
  }
  const Image flat(1, 11, 11, 3, 0.4f);
  EXPECT_NEAR(ssim(flat, flat), 1.0, 1e-9);
}

TEST(Ssim, IsSymmetric) {
  const Image a = random_image(20, 20, 11), b = random_image(20, 20, 12);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-9);
}

TEST(Ssim, CheckerboardAgainstItsInverseIsNegative) {
  Image a(1, 16, 16, 3), b(1, 16, 16, 3);
  for (Index y = 0; y < 16; ++y)
    for (Index x = 0; x < 16; ++x)
      for (Index c = 0; c < 3; ++c) {
        a(0, y, x, c) = static_cast<float>((x + y) % 2);
        b(0, y, x, c) = 1.0f - a(0, y, x, c);
      }
  EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, ConstantImagesReduceToTheLuminanceTerm) {
  const double ma = 0.3, mb = 0.4;
  const Image a(1, 14, 14, 3, static_cast<float>(ma)), b(1, 14, 14, 3, static_cast<float>(mb));
  // Luma of a constant grey is the grey level (weights sum to 1).
  const double la = static_cast<float>(ma), lb = static_cast<float>(mb);
  const double c1 = 0.01 * 0.01;
  const double expected = (2 * la * lb + c1) / (la * la + lb * lb + c1);
  EXPECT_NEAR(ssim(a, b), expected, 1e-9);
}

TEST(Ssim, RangeAndErrors) {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const double s = ssim(random_image(12, 12, seed), random_image(12, 12, seed + 100));
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
  EXPECT_THROW(ssim(random_image(10, 20, 1), random_image(10, 20, 2)), ShapeError);
  EXPECT_THROW(ssim(random_image(12, 12, 1), random_image(12, 13, 2)), ShapeError);
}

TEST(MetricsReport, JsonAndCsv) {
  MetricsReport r;
  r.config_hash = 1234;
  r.per_weather[Weather::Rain] = {25.5, 0.8, 20.0, 0.7, 3};
  r.per_weather[Weather::Snow] = {27.0, 0.9, 22.0, 0.75, 4};
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["config_hash"], 1234u);
  EXPECT_DOUBLE_EQ(j["weather"]["rain"]["psnr"].get<double>(), 25.5);
  EXPECT_EQ(j["weather"]["snow"]["count"], 4);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "weather,count,psnr,ssim,input_psnr,input_ssim");
  EXPECT_NE(csv.find("rain,3,25.5,0.8,20,0.7"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace ddcnet
