#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the code paths it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pupguard/dataset.hpp"

namespace oracle {

// Days since 1970-01-01 for a proleptic Gregorian date, by counting whole
// years and months.
inline bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

inline std::int64_t days_since_epoch(int y, int m, int d) {
  std::int64_t days = 0;
  for (int year = 1970; year < y; ++year) days += is_leap(year) ? 366 : 365;
  for (int month = 1; month < m; ++month) days += days_in_month(y, month);
  return days + d - 1;
}

inline std::int64_t micros(int y, int mo, int d, int h, int mi, int s, int us) {
  return ((days_since_epoch(y, mo, d) * 24 + h) * 60 + mi) * 60'000'000LL + s * 1'000'000LL + us;
}

// Otsu by brute force: every threshold, class statistics from scratch,
// sigma_B^2 = P1 P2 (m1 - m2)^2. Smallest maximizer wins.
struct OtsuResult {
  int best_k = 0;
  double best_variance = 0.0;
};

inline double two_class_variance(const std::array<std::uint64_t, 256>& hist, int k) {
  double n = 0;
  for (auto c : hist) n += static_cast<double>(c);
  double p1 = 0, p2 = 0, s1 = 0, s2 = 0;
  for (int i = 0; i < 256; ++i) {
    const double p = static_cast<double>(hist[i]) / n;
    if (i <= k) {
      p1 += p;
      s1 += i * p;
    } else {
      p2 += p;
      s2 += i * p;
    }
  }
  if (p1 == 0.0 || p2 == 0.0) return 0.0;
  const double m1 = s1 / p1, m2 = s2 / p2;
  return p1 * p2 * (m1 - m2) * (m1 - m2);
}

inline OtsuResult brute_otsu(const pupguard::GrayImage& img) {
  std::array<std::uint64_t, 256> hist{};
  for (auto p : img.pixels) ++hist[p];
  OtsuResult best{0, -1.0};
  for (int k = 0; k <= 254; ++k) {
    const double v = two_class_variance(hist, k);
    if (v > best.best_variance) best = {k, v};
  }
  return best;
}

// LBP computed pixel by pixel from explicit neighbour coordinates.
inline std::vector<double> naive_lbp_histogram(const pupguard::GrayImage& img) {
  // (dx, dy) clockwise from the right neighbour; y grows downward.
  static constexpr int kOffsets[8][2] = {{1, 0},  {1, 1},   {0, 1},  {-1, 1},
                                         {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
  std::vector<double> hist(256, 0.0);
  double count = 0;
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) {
      int code = 0;
      for (int i = 0; i < 8; ++i) {
        const int q = img.at(x + kOffsets[i][0], y + kOffsets[i][1]);
        code = code * 2 + (q >= img.at(x, y) ? 1 : 0);
      }
      hist[static_cast<std::size_t>(code)] += 1;
      count += 1;
    }
  }
  for (double& h : hist) h /= count;
  return hist;
}

// Cyclic Jacobi eigenvalue iteration for a dense symmetric matrix
// (row-major n x n). Returns eigenvalues sorted descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, int n) {
  auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(at(p, q)) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = at(i, i);
  std::sort(eig.rbegin(), eig.rend());
  return eig;
}

// Sample covariance (divisor n-1) of row-major data, row-major d x d.
inline std::vector<double> sample_covariance(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size(), d = rows.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / static_cast<double>(n);
  std::vector<double> cov(d * d, 0.0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]) / static_cast<double>(n - 1);
  return cov;
}

// Verifies a one-class SVM dual solution without re-solving:
//   feasibility: sum alpha = 1, 0 <= alpha <= C
//   stationarity: G_i >= rho where alpha_i < C, G_i <= rho where alpha_i > 0
// with G = Q alpha recomputed from the raw data. Returns the worst residual.
struct KktReport {
  double sum_error = 0.0;
  double box_violation = 0.0;
  double stationarity = 0.0;
};

inline KktReport check_ocsvm_kkt(const std::vector<std::vector<double>>& x,
                                 const std::vector<double>& alpha, double rho, double gamma,
                                 double C) {
  const std::size_t n = x.size();
  KktReport r;
  double sum = 0.0;
  for (double a : alpha) {
    sum += a;
    r.box_violation = std::max({r.box_violation, -a, a - C});
  }
  r.sum_error = std::abs(sum - 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double g = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t t = 0; t < x[i].size(); ++t) sq += (x[i][t] - x[j][t]) * (x[i][t] - x[j][t]);
      g += alpha[j] * std::exp(-gamma * sq);
    }
    if (alpha[i] < C) r.stationarity = std::max(r.stationarity, rho - g);
    if (alpha[i] > 0) r.stationarity = std::max(r.stationarity, g - rho);
  }
  return r;
}

inline pupguard::GrayImage random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> px(0, 255);
  pupguard::GrayImage img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(px(rng));
  return img;
}

}  // namespace oracle
