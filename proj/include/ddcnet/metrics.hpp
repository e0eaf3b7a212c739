#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "ddcnet/image_io.hpp"
#include "ddcnet/synthdata.hpp"

namespace ddcnet {

inline constexpr double kPsnrCap = 100.0;

// 10 log10(1 / MSE) over every element, MAX = 1. Identical inputs give the cap.
double psnr(const Tensor<float>& a, const Tensor<float>& b);

// Single-scale SSIM on BT.601 luma: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, averaged over valid window positions. Accepts
// (1, H, W, 3) images; throws ShapeError below 11x11.
double ssim(const Image& a, const Image& b);

// Luma plane as a row-major H*W vector.
std::vector<double> luma(const Image& img);

struct WeatherMetrics {
  double psnr = 0;
  double ssim = 0;
  double input_psnr = 0;  // degraded input vs clean
  double input_ssim = 0;
  Index count = 0;
};

struct MetricsReport {
  std::map<Weather, WeatherMetrics> per_weather;
  std::uint64_t config_hash = 0;

  std::string to_json() const;
  std::string to_csv() const;
};

}  // namespace ddcnet
