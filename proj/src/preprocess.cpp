#include "pupguard/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pupguard/error.hpp"

namespace pupguard {

double between_class_variance(const std::array<std::uint64_t, 256>& histogram, int k) {
  std::int64_t total = 0, total_sum = 0, n1 = 0, s1 = 0;
  for (int i = 0; i < 256; ++i) {
    const auto n = static_cast<std::int64_t>(histogram[i]);
    total += n;
    total_sum += i * n;
    if (i <= k) {
      n1 += n;
      s1 += i * n;
    }
  }
  if (n1 == 0 || n1 == total) return 0.0;
  // (m P1 - mu)^2 / (P1 (1-P1)) == (S n1 - s1 N)^2 / (N^2 n1 (N - n1))
  const auto num = static_cast<double>(total_sum * n1 - s1 * total);
  const auto n = static_cast<double>(total);
  return num * num / (n * n * static_cast<double>(n1) * static_cast<double>(total - n1));
}

OtsuStats otsu_from_histogram(const std::array<std::uint64_t, 256>& histogram) {
  OtsuStats stats;
  stats.histogram = histogram;
  std::int64_t total_sum = 0;
  int distinct = 0, only_level = 0;
  for (int i = 0; i < 256; ++i) {
    stats.total += histogram[i];
    total_sum += i * static_cast<std::int64_t>(histogram[i]);
    if (histogram[i] > 0) {
      ++distinct;
      only_level = i;
    }
  }
  if (stats.total == 0) throw DomainError("otsu_threshold: empty image");
  const auto n = static_cast<std::int64_t>(stats.total);
  stats.global_mean = static_cast<double>(total_sum) / static_cast<double>(n);

  if (distinct == 1) {
    stats.degenerate = true;
    stats.best_k = only_level;
    stats.best_variance = 0.0;
    return stats;
  }

  // Single pass with running class sums; identical arithmetic to
  // between_class_variance.
  std::int64_t n1 = 0, s1 = 0;
  double best = -1.0;
  for (int k = 0; k <= 254; ++k) {
    n1 += static_cast<std::int64_t>(histogram[k]);
    s1 += k * static_cast<std::int64_t>(histogram[k]);
    double var = 0.0;
    if (n1 != 0 && n1 != n) {
      const auto num = static_cast<double>(total_sum * n1 - s1 * n);
      const auto nd = static_cast<double>(n);
      var = num * num / (nd * nd * static_cast<double>(n1) * static_cast<double>(n - n1));
    }
    if (var > best) {
      best = var;
      stats.best_k = k;
    }
  }
  stats.best_variance = best;
  return stats;
}

OtsuStats otsu_threshold(const GrayImage& img) {
  if (img.empty()) throw DomainError("otsu_threshold: empty image");
  std::array<std::uint64_t, 256> histogram{};
  for (auto p : img.pixels) ++histogram[p];
  return otsu_from_histogram(histogram);
}

SegmentResult segment(const GrayImage& img, const OtsuStats& stats, Polarity polarity,
                      bool binarize) {
  if (stats.degenerate) return {img, true};
  SegmentResult out{img, false};
  for (auto& p : out.image.pixels) {
    const bool dark_side = p <= stats.best_k;
    const bool foreground = polarity == Polarity::DarkForeground ? dark_side : !dark_side;
    if (!foreground) {
      p = 255;
    } else if (binarize) {
      p = 0;
    }
  }
  return out;
}

NormalizedImage prepro2(const GrayImage& img, const Prepro2Params& params) {
  if (img.empty()) throw DomainError("prepro2: empty image");
  if (params.resize_to <= 0 || params.crop_to <= 0) {
    throw DomainError("prepro2: sizes must be positive");
  }
  if (params.crop_to > params.resize_to) {
    throw DomainError(fmt::format("prepro2: crop {} larger than resize {}", params.crop_to,
                                  params.resize_to));
  }
  if (!(params.std > 0.0)) throw DomainError("prepro2: std must be positive");

  const int size = params.resize_to;
  // Half-pixel-centre bilinear sampling; identity when sizes match.
  const double sx = static_cast<double>(img.width) / size;
  const double sy = static_cast<double>(img.height) / size;
  std::vector<double> resized(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < size; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      const double top = (1 - wx) * img.at(x0, y0) + wx * img.at(x1, y0);
      const double bottom = (1 - wx) * img.at(x0, y1) + wx * img.at(x1, y1);
      resized[static_cast<std::size_t>(y) * size + x] = (1 - wy) * top + wy * bottom;
    }
  }

  NormalizedImage out;
  out.width = out.height = params.crop_to;
  out.values.resize(static_cast<std::size_t>(params.crop_to) * params.crop_to);
  const int off = (size - params.crop_to) / 2;
  for (int y = 0; y < params.crop_to; ++y) {
    for (int x = 0; x < params.crop_to; ++x) {
      const double v = resized[static_cast<std::size_t>(y + off) * size + (x + off)] / 255.0;
      out.values[static_cast<std::size_t>(y) * params.crop_to + x] = (v - params.mean) / params.std;
    }
  }
  return out;
}

TimingStandardizer::TimingStandardizer(double mu, double sigma) : mu_(mu), sigma_(sigma) {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !(sigma > 0.0)) {
    throw FitError(fmt::format("timing standardizer: invalid mu={} sigma={}", mu, sigma));
  }
}

TimingStandardizer TimingStandardizer::fit(std::span<const double> train_intervals) {
  if (train_intervals.size() < 2) {
    throw FitError(fmt::format("timing standardizer needs at least 2 intervals, got {}",
                               train_intervals.size()));
  }
  const auto n = static_cast<double>(train_intervals.size());
  double mean = 0.0;
  for (double t : train_intervals) mean += t;
  mean /= n;
  double ss = 0.0;
  for (double t : train_intervals) ss += (t - mean) * (t - mean);
  const double sigma = std::sqrt(ss / n);
  if (!(sigma > 0.0)) throw FitError("timing standardizer: all training intervals identical");
  return TimingStandardizer(mean, sigma);
}

}  // namespace pupguard
