#include "pupguard/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "pupguard/error.hpp"

namespace pupguard {

namespace {

constexpr std::int64_t kMicrosPerSecond = 1'000'000;
constexpr std::int64_t kSecondsPerDay = 86'400;

int parse_digits(std::string_view text, std::size_t pos, std::size_t len, const char* field) {
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') {
      throw ParseError(fmt::format("timestamp '{}': non-digit character in {} field", text, field));
    }
    value = value * 10 + (c - '0');
  }
  return value;
}

void check_range(std::string_view text, int value, int lo, int hi, const char* field) {
  if (value < lo || value > hi) {
    throw ParseError(
        fmt::format("timestamp '{}': {} {} out of range [{}, {}]", text, field, value, lo, hi));
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

// Skips PGM whitespace and '#' comments.
void skip_pgm_space(std::istream& in) {
  while (true) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

CaptureInstant parse_timestamp(std::string_view text) {
  if (text.size() != 21) {
    throw ParseError(fmt::format(
        "timestamp '{}': length {} (expected 21 characters, yyyymmddHHMMSS.xxxxxx)", text,
        text.size()));
  }
  if (text[14] != '.') {
    throw ParseError(fmt::format("timestamp '{}': expected '.' before the microsecond field", text));
  }
  const int year = parse_digits(text, 0, 4, "year");
  const int month = parse_digits(text, 4, 2, "month");
  const int day = parse_digits(text, 6, 2, "day");
  const int hour = parse_digits(text, 8, 2, "hour");
  const int minute = parse_digits(text, 10, 2, "minute");
  const int second = parse_digits(text, 12, 2, "second");
  const int micros = parse_digits(text, 15, 6, "microsecond");

  check_range(text, year, 1970, 9999, "year");
  check_range(text, month, 1, 12, "month");
  const std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) {
    throw ParseError(fmt::format("timestamp '{}': day {} out of range for {:04}-{:02}", text, day,
                                 year, month));
  }
  check_range(text, hour, 0, 23, "hour");
  check_range(text, minute, 0, 59, "minute");
  check_range(text, second, 0, 59, "second");

  const std::int64_t days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  const std::int64_t seconds = days * kSecondsPerDay + hour * 3600 + minute * 60 + second;
  return CaptureInstant{seconds * kMicrosPerSecond + micros};
}

std::string format_timestamp(CaptureInstant instant) {
  const std::int64_t total = instant.micros_since_epoch();
  if (total < 0) throw DomainError("format_timestamp: negative instant");
  const std::int64_t micros = total % kMicrosPerSecond;
  const std::int64_t seconds = total / kMicrosPerSecond;
  const std::int64_t days = seconds / kSecondsPerDay;
  std::int64_t rem = seconds % kSecondsPerDay;
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  const int hour = static_cast<int>(rem / 3600);
  rem %= 3600;
  return fmt::format("{:04}{:02}{:02}{:02}{:02}{:02}.{:06}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hour,
                     rem / 60, rem % 60, micros);
}

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
  if (w < 0 || h < 0) throw DomainError("GrayImage: negative dimensions");
}

GrayImage::GrayImage(int w, int h, std::vector<std::uint8_t> data)
    : width(w), height(h), pixels(std::move(data)) {
  if (w < 0 || h < 0 || pixels.size() != static_cast<std::size_t>(w) * h) {
    throw DomainError(fmt::format("GrayImage: {} pixels for {}x{}", pixels.size(), w, h));
  }
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open image '{}'", path.string()));
  std::string magic;
  in >> magic;
  if (magic != "P5") {
    throw ParseError(fmt::format("image '{}': not a binary PGM (magic '{}')", path.string(), magic));
  }
  int width = 0, height = 0, maxval = 0;
  skip_pgm_space(in);
  in >> width;
  skip_pgm_space(in);
  in >> height;
  skip_pgm_space(in);
  in >> maxval;
  if (!in || width <= 0 || height <= 0) {
    throw ParseError(fmt::format("image '{}': malformed PGM header", path.string()));
  }
  if (maxval != 255) {
    throw ParseError(fmt::format("image '{}': maxval {} (expected 255)", path.string(), maxval));
  }
  in.get();  // single whitespace byte before the raster
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) {
    throw ParseError(fmt::format("image '{}': truncated raster", path.string()));
  }
  return GrayImage(width, height, std::move(data));
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write image '{}'", path.string()));
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::string_view label_to_string(Label label) {
  switch (label) {
    case Label::Legitimate:
      return "legit";
    case Label::Attack:
      return "attack";
    case Label::Unlabeled:
      break;
  }
  return "";
}

Label label_from_string(std::string_view text) {
  if (text == "legit") return Label::Legitimate;
  if (text == "attack") return Label::Attack;
  if (text.empty()) return Label::Unlabeled;
  throw ParseError(fmt::format("unknown label '{}'", text));
}

double press_interval(const PressPair& pair) {
  const std::int64_t delta = pair.t2 - pair.t1;
  if (delta < 0) {
    throw OrderingError(fmt::format("pair '{}': t2 precedes t1 by {} us", pair.pair_id, -delta));
  }
  return static_cast<double>(delta) / static_cast<double>(kMicrosPerSecond);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.csv";
  std::ifstream in(manifest_path);
  if (!in) throw IoError(fmt::format("missing manifest '{}'", manifest_path.string()));

  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kManifestHeader) {
    throw ParseError(fmt::format("{}:1: expected header '{}'", manifest_path.string(),
                                 kManifestHeader));
  }

  Dataset ds;
  ds.source_dir = dir;
  std::unordered_set<std::string> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto where = fmt::format("{}:{}", manifest_path.string(), line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != 7) {
      throw ParseError(fmt::format("{}: expected 7 fields, got {}", where, fields.size()));
    }
    PressPair pair;
    pair.pair_id = fields[0];
    pair.subject_id = fields[1];
    if (pair.pair_id.empty()) throw ParseError(fmt::format("{}: empty pair_id", where));
    if (!seen.insert(pair.pair_id).second) {
      throw ParseError(fmt::format("{}: duplicate pair_id '{}'", where, pair.pair_id));
    }
    try {
      pair.t1 = parse_timestamp(fields[4]);
      pair.t2 = parse_timestamp(fields[5]);
      pair.label = label_from_string(fields[6]);
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}: {}", where, e.what()));
    }
    if (pair.t2 < pair.t1) {
      throw OrderingError(fmt::format("{}: t2 precedes t1 for pair '{}'", where, pair.pair_id));
    }
    const std::filesystem::path img1 = dir / fields[2];
    const std::filesystem::path img2 = dir / fields[3];
    for (const auto& p : {img1, img2}) {
      if (!std::filesystem::exists(p)) {
        throw IoError(fmt::format("{}: missing image '{}'", where, p.string()));
      }
    }
    try {
      pair.first = read_pgm(img1);
      pair.second = read_pgm(img2);
    } catch (const Error& e) {
      throw ParseError(fmt::format("{}: {}", where, e.what()));
    }
    for (const auto* img : {&pair.first, &pair.second}) {
      if (img->width != kCanonicalImageSize || img->height != kCanonicalImageSize) {
        throw ParseError(fmt::format("{}: image is {}x{}, expected {}x{}", where, img->width,
                                     img->height, kCanonicalImageSize, kCanonicalImageSize));
      }
    }
    pair.first_id = img1.stem().string();
    pair.second_id = img2.stem().string();
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<PressPair>& pairs) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));

  std::ofstream manifest(dir / "manifest.csv", std::ios::binary);
  if (!manifest) throw IoError(fmt::format("cannot write manifest in '{}'", dir.string()));
  manifest << kManifestHeader << '\n';
  for (const auto& pair : pairs) {
    const std::string rel1 = "images/" + pair.first_id + ".pgm";
    const std::string rel2 = "images/" + pair.second_id + ".pgm";
    write_pgm(dir / rel1, pair.first);
    write_pgm(dir / rel2, pair.second);
    manifest << pair.pair_id << ',' << pair.subject_id << ',' << rel1 << ',' << rel2 << ','
             << format_timestamp(pair.t1) << ',' << format_timestamp(pair.t2) << ','
             << label_to_string(pair.label) << '\n';
  }
  if (!manifest) throw IoError(fmt::format("write failed for manifest in '{}'", dir.string()));
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

namespace {

void check_fraction(double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw DomainError(fmt::format("train fraction {} outside (0, 1]", train_fraction));
  }
}

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed) {
  check_fraction(train_fraction);
  if (ds.empty()) throw DomainError("split_dataset: empty dataset");
  const auto order = shuffled_indices(ds.size(), seed);
  const auto n_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.size())));
  Dataset train, eval;
  train.source_dir = eval.source_dir = ds.source_dir;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : eval).pairs.push_back(ds.pairs[order[i]]);
  }
  return {std::move(train), std::move(eval)};
}

std::pair<Dataset, Dataset> split_dataset_by_subject(const Dataset& ds, double train_fraction,
                                                     std::uint64_t seed) {
  check_fraction(train_fraction);
  if (ds.empty()) throw DomainError("split_dataset_by_subject: empty dataset");
  std::vector<std::string> subjects;
  {
    std::set<std::string> unique;
    for (const auto& p : ds.pairs) unique.insert(p.subject_id);
    subjects.assign(unique.begin(), unique.end());
  }
  const auto order = shuffled_indices(subjects.size(), seed);
  const auto n_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(subjects.size())));
  std::set<std::string> train_subjects;
  for (std::size_t i = 0; i < n_train; ++i) train_subjects.insert(subjects[order[i]]);
  Dataset train, eval;
  train.source_dir = eval.source_dir = ds.source_dir;
  for (const auto& p : ds.pairs) {
    (train_subjects.count(p.subject_id) ? train : eval).pairs.push_back(p);
  }
  return {std::move(train), std::move(eval)};
}

}  // namespace pupguard
