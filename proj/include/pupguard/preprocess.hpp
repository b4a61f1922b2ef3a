#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pupguard/dataset.hpp"

namespace pupguard {

// Histogram statistics and the optimal Otsu threshold for one image.
struct OtsuStats {
  std::array<std::uint64_t, 256> histogram{};
  std::uint64_t total = 0;
  double global_mean = 0.0;
  int best_k = 0;
  double best_variance = 0.0;
  // Single gray level: no threshold separates anything.
  bool degenerate = false;
};

OtsuStats otsu_from_histogram(const std::array<std::uint64_t, 256>& histogram);
OtsuStats otsu_threshold(const GrayImage& img);

// Between-class variance sigma_B^2(k) from the histogram, evaluated with the
// single-ratio form (m*P1 - mu(k))^2 / (P1 (1 - P1)). The numerator is formed
// in exact integer arithmetic. Returns 0 when P1 is 0 or 1.
double between_class_variance(const std::array<std::uint64_t, 256>& histogram, int k);

enum class Polarity { DarkForeground, LightForeground };

struct SegmentResult {
  GrayImage image;
  bool degenerate = false;  // stats were degenerate, image returned unchanged
};

// Background pixels become 255; foreground pixels keep their intensity, or
// become 0 when `binarize` is set.
SegmentResult segment(const GrayImage& img, const OtsuStats& stats,
                      Polarity polarity = Polarity::DarkForeground, bool binarize = false);

struct NormalizedImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

struct Prepro2Params {
  int resize_to = 224;
  int crop_to = 224;
  double mean = 0.485;
  double std = 0.229;
};

// Bilinear resize to resize_to x resize_to, center crop, scale to [0,1],
// then (v - mean) / std.
NormalizedImage prepro2(const GrayImage& img, const Prepro2Params& params);

// Standardizes inter-press intervals: t* = (t - mu) / sigma, with sigma the
// population (divisor N) standard deviation of the training intervals.
class TimingStandardizer {
 public:
  TimingStandardizer(double mu, double sigma);

  static TimingStandardizer fit(std::span<const double> train_intervals);

  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  double apply(double interval_seconds) const { return (interval_seconds - mu_) / sigma_; }

 private:
  double mu_;
  double sigma_;
};

}  // namespace pupguard
