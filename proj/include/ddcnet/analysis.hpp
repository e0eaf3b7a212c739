#pragma once

#include <array>
#include <string>
#include <vector>

#include "ddcnet/synthdata.hpp"

namespace ddcnet {

inline constexpr int kRadialBins = 64;

// Mean log-amplitude of the luma spectrum over `bins` rings of normalized
// radial frequency in [0, 0.5]; corner frequencies beyond 0.5 are dropped.
std::vector<double> radial_log_amplitude(const Image& img, int bins = kRadialBins);
// Same profile for a single (1, H, W, 1) plane.
std::vector<double> radial_log_amplitude_plane(const Tensor<double>& plane, int bins = kRadialBins);

// Nearest-centroid classifier over fixed-length feature vectors.
class NearestCentroid {
 public:
  void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& labels);
  int predict(const std::vector<double>& v) const;
  double accuracy(const std::vector<std::vector<double>>& x, const std::vector<int>& labels) const;
  const std::vector<std::vector<double>>& centroids() const { return centroids_; }

 private:
  std::vector<std::vector<double>> centroids_;
};

double l2_distance(const std::vector<double>& a, const std::vector<double>& b);

// Class means plus the spread of each class: the RMS L2 distance of its
// members to the class mean.
struct ClassStats {
  std::vector<std::vector<double>> means;
  std::vector<double> spread;
  // Smallest pairwise distance between class means.
  double min_mean_distance() const;
  double max_spread() const;
};

ClassStats class_stats(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                       int classes);

}  // namespace ddcnet
