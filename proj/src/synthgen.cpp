#include "pupguard/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "pupguard/error.hpp"

namespace pupguard {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Smooth orientation field of one finger: quadratic in normalized position.
struct OrientationField {
  std::array<double, 6> coef{};
  double phase = 0.0;

  explicit OrientationField(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> base(0.0, std::numbers::pi);
    std::normal_distribution<double> curvature(0.0, 0.45);
    coef[0] = base(rng);
    for (std::size_t i = 1; i < coef.size(); ++i) coef[i] = curvature(rng);
    phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  }

  double operator()(double u, double v) const {
    const double a = u / 80.0, b = v / 80.0;
    return coef[0] + coef[1] * a + coef[2] * b + coef[3] * a * a + coef[4] * a * b +
           coef[5] * b * b;
  }
};

constexpr int kSize = kCanonicalImageSize;
constexpr double kMaskRadius = 32.0;    // pixels at pressure 1
constexpr double kDarkness = 150.0;     // contact darkness at pressure 1
constexpr double kNoiseFraction = 0.05; // of full scale, inside the contact area

double truncated_normal(std::mt19937_64& rng, double mean, double std, double limit_sigmas) {
  std::normal_distribution<double> dist(mean, std);
  while (true) {
    const double v = dist(rng);
    if (std::abs(v - mean) <= limit_sigmas * std) return v;
  }
}

PressParams natural_press(const SubjectProfile& profile, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pressure(0.9, 1.1);
  std::uniform_real_distribution<double> offset(-3.5, 3.5);
  std::uniform_real_distribution<double> rotation(-10.0, 10.0);
  PressParams p;
  p.pressure = profile.base_pressure * pressure(rng);
  p.offset_x = offset(rng);
  p.offset_y = offset(rng);
  p.rotation_deg = rotation(rng);
  return p;
}

}  // namespace

void SubjectProfile::validate() const {
  if (!(base_interval_std > 0.0)) throw DomainError("profile: base_interval_std must be > 0");
  if (!(base_interval_mean > 3.0 * base_interval_std)) {
    throw DomainError("profile: base_interval_mean must exceed 3 x base_interval_std");
  }
  if (!(base_pressure > 0.0 && base_pressure <= 1.0)) {
    throw DomainError("profile: base_pressure outside (0, 1]");
  }
  if (!(ridge_frequency > 0.0)) throw DomainError("profile: ridge_frequency must be > 0");
}

SubjectProfile random_profile(std::uint64_t seed) {
  std::mt19937_64 rng(mix(seed, 0x5eed));
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SubjectProfile p;
  p.ridge_frequency = uniform(0.08, 0.15);
  p.ridge_orientation_field_seed = rng();
  p.base_interval_mean = uniform(0.9, 1.1);
  p.base_interval_std = uniform(0.10, 0.15);
  p.base_pressure = uniform(0.85, 1.0);
  return p;
}

void AttackParams::validate() const {
  if (interval_shift_sigmas < 0 || pressure_gain < 0 || center_offset_px < 0 || rotation_deg < 0 ||
      smear_length_px < 0) {
    throw DomainError("attack params: magnitudes must be non-negative");
  }
  if (!(channel_mix >= 0.0 && channel_mix <= 1.0)) {
    throw DomainError("attack params: channel_mix outside [0, 1]");
  }
  if (interval_shift_sigmas == 0 && pressure_gain == 0 && center_offset_px == 0 &&
      rotation_deg == 0 && smear_length_px == 0) {
    throw DomainError("attack params: every perturbation magnitude is zero");
  }
}

GrayImage gen_fingerprint_image(const SubjectProfile& profile, const PressParams& press,
                                std::uint64_t rng_seed, int finger) {
  profile.validate();
  if (!(press.pressure > 0.0 && press.pressure <= 2.0)) {
    throw DomainError(fmt::format("press pressure {} outside (0, 2]", press.pressure));
  }
  const OrientationField field(mix(profile.ridge_orientation_field_seed, static_cast<std::uint64_t>(finger)));
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> noise(0.0, kNoiseFraction * 255.0);

  const double cx = (kSize - 1) / 2.0 + press.offset_x;
  const double cy = (kSize - 1) / 2.0 + press.offset_y;
  const double theta = press.rotation_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double radius = kMaskRadius * std::sqrt(press.pressure);
  const double darkness = kDarkness * press.pressure;
  const double omega = 2.0 * std::numbers::pi * profile.ridge_frequency;

  // Beyond 2.5 radii the mask is below exp(-39): no ink at 8-bit precision.
  const double cutoff_sq = (2.5 * radius) * (2.5 * radius);
  std::vector<double> value(static_cast<std::size_t>(kSize) * kSize, 255.0);
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      const double px = x - cx, py = y - cy;
      if (px * px + py * py > cutoff_sq) continue;
      // Finger-frame coordinates: undo the press rotation.
      const double u = cos_t * px + sin_t * py;
      const double v = -sin_t * px + cos_t * py;
      const double phi = field(u, v);
      const double ridge = 0.5 * (1.0 + std::cos(omega * (u * std::cos(phi) + v * std::sin(phi)) + field.phase));
      const double r_sq = (px * px + py * py) / (radius * radius);
      const double mask = std::exp(-r_sq * r_sq);
      const double ink = darkness * (0.35 + 0.65 * ridge) + noise(rng);
      value[static_cast<std::size_t>(y) * kSize + x] = 255.0 - mask * ink;
    }
  }

  GrayImage img(kSize, kSize);
  const int smear = std::max(0, press.smear_px);
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      double sum = 0.0;
      for (int s = 0; s <= smear; ++s) {
        sum += value[static_cast<std::size_t>(y) * kSize + std::max(0, x - s)];
      }
      const double v = std::clamp(sum / (smear + 1), 0.0, 255.0);
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return img;
}

PressPair gen_press_pair(const SubjectProfile& profile, const std::optional<AttackParams>& attack,
                         std::uint64_t rng_seed, const PairIdentity& identity) {
  profile.validate();
  if (attack) attack->validate();
  std::mt19937_64 rng(rng_seed);

  // Draw order is identical in both modes so the unperturbed channel keeps
  // the normal-mode distribution.
  const double mode_draw = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double z = truncated_normal(rng, 0.0, 1.0, 4.0);
  PressParams first = natural_press(profile, rng);
  PressParams second = natural_press(profile, rng);
  const std::uint64_t seed1 = rng();
  const std::uint64_t seed2 = rng();
  const double direction = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  const double rotation_sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;

  double mean = profile.base_interval_mean;
  if (attack && mode_draw < attack->channel_mix) {
    mean += attack->interval_shift_sigmas * profile.base_interval_std;
  } else if (attack) {
    second.pressure = std::min(2.0, second.pressure * (1.0 + attack->pressure_gain));
    second.offset_x += attack->center_offset_px * std::cos(direction);
    second.offset_y += attack->center_offset_px * std::sin(direction);
    second.rotation_deg += rotation_sign * attack->rotation_deg;
    second.smear_px = attack->smear_length_px;
  }
  const double interval = std::max(1e-6, mean + z * profile.base_interval_std);

  PressPair pair;
  pair.pair_id = identity.pair_id;
  pair.subject_id = identity.subject_id;
  pair.first_id = identity.pair_id + "_1";
  pair.second_id = identity.pair_id + "_2";
  pair.first = gen_fingerprint_image(profile, first, seed1, 0);
  pair.second = gen_fingerprint_image(profile, second, seed2, 1);
  pair.t1 = identity.t1;
  pair.t2 = CaptureInstant{identity.t1.micros_since_epoch() + std::llround(interval * 1e6)};
  pair.label = attack ? Label::Attack : Label::Legitimate;
  return pair;
}

Dataset gen_dataset(int n_normal, int n_attack, int n_subjects, const AttackParams& attack,
                    std::uint64_t seed, const std::filesystem::path& out_dir,
                    std::uint64_t population_seed) {
  if (n_normal < 0 || n_attack < 0) throw DomainError("gen_dataset: negative pair count");
  if (n_subjects < 1) throw DomainError("gen_dataset: need at least one subject");
  if (n_attack > 0) attack.validate();

  std::vector<SubjectProfile> profiles;
  for (int s = 0; s < n_subjects; ++s) {
    profiles.push_back(random_profile(mix(population_seed, static_cast<std::uint64_t>(s) + 1)));
  }

  // 2024-01-01 00:00:00, one attempt per minute.
  constexpr std::int64_t kBase = 1'704'067'200LL * 1'000'000LL;
  const int total = n_normal + n_attack;
  std::vector<PressPair> pairs;
  pairs.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const int s = i % n_subjects;
    PairIdentity id;
    id.pair_id = fmt::format("g{}-p{:05}", seed, i);
    id.subject_id = fmt::format("s{:03}", s);
    id.t1 = CaptureInstant{kBase + static_cast<std::int64_t>(i) * 60'000'000LL};
    const bool is_attack = i >= n_normal;
    pairs.push_back(gen_press_pair(profiles[static_cast<std::size_t>(s)],
                                   is_attack ? std::optional<AttackParams>(attack) : std::nullopt,
                                   mix(seed, 0x10000ULL + static_cast<std::uint64_t>(i)), id));
  }
  write_dataset(out_dir, pairs);
  return load_dataset(out_dir);
}

EmbeddingTable pooled_embeddings(const Dataset& ds, int grid) {
  if (grid < 1) throw DomainError(fmt::format("pooled_embeddings: grid={} must be >= 1", grid));
  EmbeddingTable table(grid * grid);
  const auto pool = [grid](const GrayImage& img) {
    if (img.width < grid || img.height < grid) {
      throw DomainError(fmt::format("pooled_embeddings: {}x{} image smaller than grid {}", img.width,
                                    img.height, grid));
    }
    std::vector<double> cells(static_cast<std::size_t>(grid * grid), 0.0);
    for (int gy = 0; gy < grid; ++gy) {
      const int y0 = gy * img.height / grid, y1 = (gy + 1) * img.height / grid;
      for (int gx = 0; gx < grid; ++gx) {
        const int x0 = gx * img.width / grid, x1 = (gx + 1) * img.width / grid;
        double sum = 0.0;
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) sum += img.at(x, y);
        }
        cells[static_cast<std::size_t>(gy * grid + gx)] = sum / (255.0 * (y1 - y0) * (x1 - x0));
      }
    }
    return cells;
  };
  for (const auto& p : ds.pairs) {
    table.insert(p.first_id, pool(p.first));
    table.insert(p.second_id, pool(p.second));
  }
  return table;
}

}  // namespace pupguard
