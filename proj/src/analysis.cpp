#include "ddcnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ddcnet/metrics.hpp"
#include "ddcnet/spectral.hpp"

namespace ddcnet {

std::vector<double> radial_log_amplitude(const Image& img, int bins) {
  const auto y = luma(img);
  Tensor<double> plane(1, img.h(), img.w(), 1);
  std::copy(y.begin(), y.end(), plane.data());
  return radial_log_amplitude_plane(plane, bins);
}

std::vector<double> radial_log_amplitude_plane(const Tensor<double>& plane, int bins) {
  if (bins < 1) throw ConfigError("radial profile needs at least one bin");
  require_rank4(plane.dims(), "radial_log_amplitude_plane");
  if (plane.n() != 1 || plane.c() != 1) throw ShapeError("radial profile expects one plane");
  const Index h = plane.h(), w = plane.w();
  const Tensor<double> amp = amplitude(fft2(plane));
  std::vector<double> sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<Index> count(static_cast<std::size_t>(bins), 0);
  for (Index u = 0; u < h; ++u) {
    const double fu = static_cast<double>(u <= h / 2 ? u : u - h) / static_cast<double>(h);
    for (Index v = 0; v < w; ++v) {
      const double fv = static_cast<double>(v <= w / 2 ? v : v - w) / static_cast<double>(w);
      const double r = std::sqrt(fu * fu + fv * fv);
      if (r > 0.5) continue;
      const auto bin = std::min<std::size_t>(static_cast<std::size_t>(r / 0.5 * bins),
                                             static_cast<std::size_t>(bins - 1));
      sum[bin] += std::log(amp(0, u, v, 0) + 1e-6);
      ++count[bin];
    }
  }
  // Rings too thin to hold a sample (tiny images) borrow the previous ring.
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] > 0) {
      sum[i] /= static_cast<double>(count[i]);
    } else {
      sum[i] = i > 0 ? sum[i - 1] : 0.0;
    }
  }
  return sum;
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("l2_distance: length mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

ClassStats class_stats(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                       int classes) {
  if (x.empty() || x.size() != labels.size()) throw DataError("class_stats: bad input");
  const std::size_t dim = x.front().size();
  ClassStats s;
  s.means.assign(static_cast<std::size_t>(classes), std::vector<double>(dim, 0.0));
  s.spread.assign(static_cast<std::size_t>(classes), 0.0);
  std::vector<Index> n(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    if (k >= s.means.size()) throw DataError("class_stats: label out of range");
    for (std::size_t d = 0; d < dim; ++d) s.means[k][d] += x[i][d];
    ++n[k];
  }
  for (std::size_t k = 0; k < s.means.size(); ++k) {
    if (n[k] == 0) throw DataError("class_stats: empty class");
    for (double& v : s.means[k]) v /= static_cast<double>(n[k]);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto k = static_cast<std::size_t>(labels[i]);
    const double d = l2_distance(x[i], s.means[k]);
    s.spread[k] += d * d;
  }
  for (std::size_t k = 0; k < s.spread.size(); ++k) {
    s.spread[k] = std::sqrt(s.spread[k] / static_cast<double>(n[k]));
  }
  return s;
}

double ClassStats::min_mean_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < means.size(); ++i)
    for (std::size_t j = i + 1; j < means.size(); ++j) best = std::min(best, l2_distance(means[i], means[j]));
  return best;
}

double ClassStats::max_spread() const {
  double m = 0;
  for (double v : spread) m = std::max(m, v);
  return m;
}

void NearestCentroid::fit(const std::vector<std::vector<double>>& x,
                          const std::vector<int>& labels) {
  int classes = 0;
  for (int l : labels) classes = std::max(classes, l + 1);
  centroids_ = class_stats(x, labels, classes).means;
}

int NearestCentroid::predict(const std::vector<double>& v) const {
  if (centroids_.empty()) throw ConfigError("NearestCentroid: not fitted");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centroids_.size(); ++k) {
    const double d = l2_distance(v, centroids_[k]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

double NearestCentroid::accuracy(const std::vector<std::vector<double>>& x,
                                 const std::vector<int>& labels) const {
  if (x.empty()) return 0.0;
  Index hits = 0;
  for (std::size_t i = 0; i < x.size(); ++i) hits += predict(x[i]) == labels[i];
  return static_cast<double>(hits) / static_cast<double>(x.size());
}

}  // namespace ddcnet
