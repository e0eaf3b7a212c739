#include "ddcnet/metrics.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace ddcnet {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> g{};
  double sum = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Separable Gaussian filter restricted to fully covered positions.
std::vector<double> filter_valid(const std::vector<double>& in, Index h, Index w) {
  static const auto g = gaussian_window();
  const Index oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h * ow));
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * in[static_cast<std::size_t>(y * w + x + k)];
      rows[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (Index y = 0; y < oh; ++y)
    for (Index x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[static_cast<std::size_t>((y + k) * ow + x)];
      out[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  return out;
}

}  // namespace

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
  require_same_shape(a, b, "psnr");
  if (a.size() == 0) throw ShapeError("psnr: empty images");
  double se = 0;
  for (Index i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> luma(const Image& img) {
  require_rank4(img.dims(), "luma");
  if (img.n() != 1 || img.c() != 3) throw ShapeError("luma: expected (1, H, W, 3)");
  std::vector<double> y(static_cast<std::size_t>(img.h() * img.w()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const float* p = img.data() + 3 * i;
    y[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return y;
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  const Index h = a.h(), w = a.w();
  if (h < kWindow || w < kWindow) throw ShapeError("ssim: image smaller than the 11x11 window");
  const auto ya = luma(a), yb = luma(b);
  std::vector<double> aa(ya.size()), bb(ya.size()), ab(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) {
    aa[i] = ya[i] * ya[i];
    bb[i] = yb[i] * yb[i];
    ab[i] = ya[i] * yb[i];
  }
  const auto mu_a = filter_valid(ya, h, w), mu_b = filter_valid(yb, h, w);
  const auto e_aa = filter_valid(aa, h, w), e_bb = filter_valid(bb, h, w),
             e_ab = filter_valid(ab, h, w);
  double total = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return total / static_cast<double>(mu_a.size());
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  for (const auto& [w, m] : per_weather) {
    j["weather"][to_string(w)] = {{"psnr", m.psnr},
                                  {"ssim", m.ssim},
                                  {"input_psnr", m.input_psnr},
                                  {"input_ssim", m.input_ssim},
                                  {"count", m.count}};
  }
  return j.dump(2);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "weather,count,psnr,ssim,input_psnr,input_ssim\n" << std::setprecision(10);
  for (const auto& [w, m] : per_weather) {
    os << to_string(w) << ',' << m.count << ',' << m.psnr << ',' << m.ssim << ',' << m.input_psnr
       << ',' << m.input_ssim << '\n';
  }
  return os.str();
}

}  // namespace ddcnet
