#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pupguard {

inline constexpr int kCanonicalImageSize = 160;

// Capture instant with microsecond resolution. Timestamps are naive local
// time; only differences between two instants are ever consumed.
class CaptureInstant {
 public:
  constexpr CaptureInstant() = default;
  explicit constexpr CaptureInstant(std::int64_t micros) : micros_(micros) {}

  constexpr std::int64_t micros_since_epoch() const { return micros_; }

  friend constexpr std::int64_t operator-(CaptureInstant a, CaptureInstant b) {
    return a.micros_ - b.micros_;
  }
  friend constexpr auto operator<=>(CaptureInstant, CaptureInstant) = default;

 private:
  std::int64_t micros_ = 0;
};

// Parses `yyyymmddHHMMSS.xxxxxx`. Throws ParseError naming the offending
// field. Years before 1970 are rejected (instants are non-negative).
CaptureInstant parse_timestamp(std::string_view text);

// Inverse of parse_timestamp.
std::string format_timestamp(CaptureInstant instant);

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);
  GrayImage(int w, int h, std::vector<std::uint8_t> data);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const { return pixels.empty(); }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Binary PGM (P5, maxval 255).
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

enum class Label { Legitimate, Attack, Unlabeled };

std::string_view label_to_string(Label label);  // "legit", "attack", ""
Label label_from_string(std::string_view text);

struct PressPair {
  std::string pair_id;
  std::string subject_id;
  // Image ids are the image filenames without extension; they key into
  // embedding tables.
  std::string first_id;
  std::string second_id;
  GrayImage first;
  GrayImage second;
  CaptureInstant t1;
  CaptureInstant t2;
  Label label = Label::Unlabeled;

  friend bool operator==(const PressPair&, const PressPair&) = default;
};

// Inter-press interval in seconds. Throws OrderingError if t2 < t1.
double press_interval(const PressPair& pair);

struct Dataset {
  std::vector<PressPair> pairs;
  std::filesystem::path source_dir;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

inline constexpr std::string_view kManifestHeader = "pair_id,subject_id,img1,img2,t1,t2,label";

// Reads `dir/manifest.csv` and the referenced PGM images. Errors carry the
// 1-based manifest line number.
Dataset load_dataset(const std::filesystem::path& dir);

// Writes `dir/manifest.csv` and `dir/images/<id>.pgm` for every pair.
void write_dataset(const std::filesystem::path& dir, const std::vector<PressPair>& pairs);

// Seeded shuffle then prefix-take: for a fixed seed, the train set for a
// smaller fraction is a prefix (hence subset) of the train set for a larger
// one. |train| = round(fraction * |ds|).
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed);

// Same as split_dataset but over subjects: whole subjects go to one side.
// The train side receives round(fraction * n_subjects) subjects.
std::pair<Dataset, Dataset> split_dataset_by_subject(const Dataset& ds, double train_fraction,
                                                     std::uint64_t seed);

// The shuffled order used by split_dataset for this seed.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace pupguard
