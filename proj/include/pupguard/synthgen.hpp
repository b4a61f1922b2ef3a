#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "pupguard/dataset.hpp"
#include "pupguard/features.hpp"

namespace pupguard {

// Normal pressing behaviour of one synthetic subject.
struct SubjectProfile {
  double ridge_frequency = 0.11;  // cycles per pixel
  std::uint64_t ridge_orientation_field_seed = 0;
  double base_interval_mean = 1.0;  // seconds
  double base_interval_std = 0.15;  // seconds
  double base_pressure = 1.0;       // (0, 1]

  // Throws DomainError unless std > 0, mean > 3 std, pressure in (0, 1].
  void validate() const;
};

// Draws a valid profile with distinct ridge/orientation/timing parameters.
SubjectProfile random_profile(std::uint64_t seed);

// How a coerced press pair deviates from the subject's normal pattern.
struct AttackParams {
  double interval_shift_sigmas = 4.0;
  double pressure_gain = 0.4;  // multiplicative: 0.4 -> +40 %
  double center_offset_px = 20.0;
  double rotation_deg = 25.0;
  int smear_length_px = 6;
  // Probability an attack is timing-only; otherwise it is image-only.
  double channel_mix = 0.5;

  void validate() const;
};

struct PressParams {
  double pressure = 1.0;  // (0, 2]
  double offset_x = 0.0;  // pixels
  double offset_y = 0.0;
  double rotation_deg = 0.0;
  int smear_px = 0;
};

// 160x160 oriented-sinusoid ridge texture under a radial press mask. Higher
// pressure darkens the print and widens the contact area; smear is a
// one-sided horizontal drag of the given length. Pure function of inputs.
GrayImage gen_fingerprint_image(const SubjectProfile& profile, const PressParams& press,
                                std::uint64_t rng_seed, int finger = 0);

// Identifiers and base time stamped onto a generated pair.
struct PairIdentity {
  std::string pair_id = "p0";
  std::string subject_id = "s0";
  CaptureInstant t1{1'700'000'000'000'000};
};

// Normal mode when `attack` is empty. Attack mode perturbs either the
// interval (probability channel_mix) or the second image, never both.
PressPair gen_press_pair(const SubjectProfile& profile, const std::optional<AttackParams>& attack,
                         std::uint64_t rng_seed, const PairIdentity& identity = {});

// Writes a dataset directory (manifest + PGM images) and loads it back.
// Legitimate pairs come first, then attacks; subjects are assigned
// round-robin. Subject profiles depend only on `population_seed`, so sets
// generated with different `seed`s share subjects. Pair ids embed `seed`.
Dataset gen_dataset(int n_normal, int n_attack, int n_subjects, const AttackParams& attack,
                    std::uint64_t seed, const std::filesystem::path& out_dir,
                    std::uint64_t population_seed = 0);

// Stand-in for pretrained CNN embeddings: mean intensity of each cell of a
// grid x grid partition, scaled to [0, 1], for both images of every pair.
EmbeddingTable pooled_embeddings(const Dataset& ds, int grid = 8);

}  // namespace pupguard
