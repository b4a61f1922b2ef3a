#include "pupguard/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "pupguard/error.hpp"

namespace pupguard {

bool FeatureVector::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// LBP

namespace {

// Patch indices of the eight neighbours, MSB first.
constexpr std::array<int, 8> kClockwiseFromRight = {5, 8, 7, 6, 3, 0, 1, 2};

}  // namespace

std::uint8_t lbp_code(std::span<const std::uint8_t, 9> patch) {
  const std::uint8_t centre = patch[4];
  unsigned code = 0;
  for (int i = 0; i < 8; ++i) {
    if (patch[kClockwiseFromRight[i]] >= centre) code |= 1u << (7 - i);
  }
  return static_cast<std::uint8_t>(code);
}

FeatureVector lbp_histogram(const GrayImage& img, int grid) {
  if (img.width < 3 || img.height < 3) {
    throw DomainError(fmt::format("lbp_histogram: image {}x{} smaller than 3x3", img.width,
                                  img.height));
  }
  const int iw = img.width - 2, ih = img.height - 2;
  if (grid < 1 || grid > iw || grid > ih) {
    throw DomainError(fmt::format("lbp_histogram: grid {} invalid for {}x{} interior", grid, iw, ih));
  }
  std::vector<double> counts(static_cast<std::size_t>(grid) * grid * 256, 0.0);
  std::vector<double> region_total(static_cast<std::size_t>(grid) * grid, 0.0);
  std::array<std::uint8_t, 9> patch{};
  for (int y = 1; y < img.height - 1; ++y) {
    const int gy = (y - 1) * grid / ih;
    for (int x = 1; x < img.width - 1; ++x) {
      const int gx = (x - 1) * grid / iw;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) patch[(dy + 1) * 3 + (dx + 1)] = img.at(x + dx, y + dy);
      }
      const std::size_t region = static_cast<std::size_t>(gy) * grid + gx;
      counts[region * 256 + lbp_code(patch)] += 1.0;
      region_total[region] += 1.0;
    }
  }
  for (std::size_t r = 0; r < region_total.size(); ++r) {
    for (std::size_t b = 0; b < 256; ++b) counts[r * 256 + b] /= region_total[r];
  }
  return {std::move(counts), Provenance::LBP};
}

// ---------------------------------------------------------------------------
// HOG

GradientField gradient_field(const GrayImage& img) {
  GradientField f;
  f.width = img.width;
  f.height = img.height;
  const std::size_t n = img.pixels.size();
  f.gx.resize(n);
  f.gy.resize(n);
  f.magnitude.resize(n);
  f.orientation.resize(n);
  auto px = [&](int x, int y) -> double {
    x = std::clamp(x, 0, img.width - 1);
    y = std::clamp(y, 0, img.height - 1);
    return img.at(x, y);
  };
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double gx = ((px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                         (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1))) / 8.0;
      const double gy = ((px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                         (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1))) / 8.0;
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      f.gx[i] = gx;
      f.gy[i] = gy;
      f.magnitude[i] = std::sqrt(gx * gx + gy * gy);
      double theta = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (theta < 0.0) theta += 180.0;
      if (theta >= 180.0) theta -= 180.0;
      f.orientation[i] = theta;
    }
  }
  return f;
}

namespace {

void check_hog_geometry(int width, int height, const HogParams& p) {
  if (p.cell <= 0 || p.block <= 0 || p.stride <= 0 || p.bins <= 0) {
    throw DomainError("hog: parameters must be positive");
  }
  if (width % p.cell != 0 || height % p.cell != 0) {
    throw DomainError(
        fmt::format("hog: image {}x{} not divisible by cell size {}", width, height, p.cell));
  }
  if (width / p.cell < p.block || height / p.cell < p.block) {
    throw DomainError(fmt::format("hog: image {}x{} smaller than one block", width, height));
  }
}

}  // namespace

std::size_t hog_length(int width, int height, const HogParams& p) {
  check_hog_geometry(width, height, p);
  const int bx = (width / p.cell - p.block) / p.stride + 1;
  const int by = (height / p.cell - p.block) / p.stride + 1;
  return static_cast<std::size_t>(bx) * by * p.block * p.block * p.bins;
}

std::vector<double> hog_cell_histograms(const GradientField& field, const HogParams& p) {
  check_hog_geometry(field.width, field.height, p);
  const int cells_x = field.width / p.cell;
  const int cells_y = field.height / p.cell;
  const double bin_width = 180.0 / p.bins;
  std::vector<double> hist(static_cast<std::size_t>(cells_x) * cells_y * p.bins, 0.0);
  for (int y = 0; y < field.height; ++y) {
    for (int x = 0; x < field.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * field.width + x;
      const double mag = field.magnitude[i];
      if (mag == 0.0) continue;
      // Bin b is centred at (b + 0.5) * bin_width; wrap at 0/180.
      const double pos = field.orientation[i] / bin_width - 0.5;
      const double lo_f = std::floor(pos);
      const double frac = pos - lo_f;
      const int lo = (static_cast<int>(lo_f) + p.bins) % p.bins;
      const int hi = (lo + 1) % p.bins;
      const std::size_t cell =
          static_cast<std::size_t>(y / p.cell) * cells_x + static_cast<std::size_t>(x / p.cell);
      hist[cell * p.bins + lo] += mag * (1.0 - frac);
      hist[cell * p.bins + hi] += mag * frac;
    }
  }
  return hist;
}

FeatureVector hog_descriptor(const GrayImage& img, const HogParams& p) {
  const std::size_t length = hog_length(img.width, img.height, p);
  const auto hist = hog_cell_histograms(gradient_field(img), p);
  const int cells_x = img.width / p.cell;
  const int cells_y = img.height / p.cell;
  constexpr double kEps = 1e-5;

  FeatureVector out;
  out.provenance = Provenance::HOG;
  out.values.reserve(length);
  std::vector<double> block(static_cast<std::size_t>(p.block) * p.block * p.bins);
  for (int by = 0; by + p.block <= cells_y; by += p.stride) {
    for (int bx = 0; bx + p.block <= cells_x; bx += p.stride) {
      std::size_t j = 0;
      for (int cy = by; cy < by + p.block; ++cy) {
        for (int cx = bx; cx < bx + p.block; ++cx) {
          const std::size_t cell = static_cast<std::size_t>(cy) * cells_x + cx;
          for (int b = 0; b < p.bins; ++b) block[j++] = hist[cell * p.bins + b];
        }
      }
      double sq = 0.0;
      for (double v : block) sq += v * v;
      const double inv = 1.0 / std::sqrt(sq + kEps * kEps);
      for (double v : block) out.values.push_back(v * inv);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

void EmbeddingTable::insert(const std::string& image_id, std::vector<double> values) {
  if (static_cast<int>(values.size()) != dim_) {
    throw DomainError(fmt::format("embedding '{}': {} values, table dim {}", image_id,
                                  values.size(), dim_));
  }
  if (!rows_.emplace(image_id, FeatureVector{std::move(values), Provenance::Embedding}).second) {
    throw DomainError(fmt::format("embedding '{}': duplicate id", image_id));
  }
}

const FeatureVector& EmbeddingTable::at(const std::string& image_id) const {
  const auto it = rows_.find(image_id);
  if (it == rows_.end()) throw LookupError(fmt::format("no embedding for image '{}'", image_id));
  return it->second;
}

void EmbeddingTable::merge(const EmbeddingTable& other) {
  if (other.dim_ != dim_) {
    throw DomainError(fmt::format("embedding merge: dim {} vs {}", other.dim_, dim_));
  }
  for (const auto& [id, row] : other.rows_) insert(id, row.values);
}

void EmbeddingTable::save(const std::filesystem::path& file) const {
  std::ofstream out(file);
  if (!out) throw IoError(fmt::format("cannot write embedding file '{}'", file.string()));
  out << fmt::format("#dim={}\n", dim_);
  for (const auto& [id, row] : rows_) out << fmt::format("{},{}\n", id, fmt::join(row.values, ","));
  if (!out) throw IoError(fmt::format("write failed for '{}'", file.string()));
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(fmt::format("cannot open embedding file '{}'", file.string()));
  const auto where = [&](int line) { return fmt::format("{}:{}", file.string(), line); };

  std::string line;
  if (!std::getline(in, line)) throw ParseError(fmt::format("{}: missing #dim header", where(1)));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int dim = 0;
  {
    constexpr std::string_view prefix = "#dim=";
    const auto rest = std::string_view(line).substr(std::min(line.size(), prefix.size()));
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), dim);
    if (!line.starts_with(prefix) || ec != std::errc{} || ptr != rest.data() + rest.size() ||
        dim <= 0) {
      throw ParseError(fmt::format("{}: expected '#dim=<d>' header, got '{}'", where(1), line));
    }
  }

  EmbeddingTable table(dim);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0) {
      throw ParseError(fmt::format("{}: expected '<image_id>,v1,...'", where(line_no)));
    }
    std::string id = line.substr(0, comma);
    std::vector<double> values;
    std::size_t pos = comma + 1;
    while (true) {
      const std::size_t next = std::min(line.find(',', pos), line.size());
      double v = 0.0;
      const char* first = line.data() + pos;
      const char* last = line.data() + next;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw ParseError(fmt::format("{}: non-numeric value '{}'", where(line_no),
                                     std::string(first, last)));
      }
      values.push_back(v);
      if (next == line.size()) break;
      pos = next + 1;
    }
    if (static_cast<int>(values.size()) != dim) {
      throw ParseError(fmt::format("{}: {} values, header declares dim={}", where(line_no),
                                   values.size(), dim));
    }
    if (table.contains(id)) {
      throw ParseError(fmt::format("{}: duplicate image id '{}'", where(line_no), id));
    }
    table.insert(id, std::move(values));
  }
  return table;
}

// ---------------------------------------------------------------------------
// PCA

int default_pca_k(int n, int d) { return std::max(1, std::min({32, n - 1, d})); }

namespace {

// Flip each column so its largest-magnitude entry is positive.
void fix_signs(Eigen::MatrixXd& components) {
  for (Eigen::Index c = 0; c < components.cols(); ++c) {
    Eigen::Index arg = 0;
    components.col(c).cwiseAbs().maxCoeff(&arg);
    if (components(arg, c) < 0.0) components.col(c) *= -1.0;
  }
}

// Replaces column `c` with a unit vector orthogonal to columns [0, c).
void complete_orthonormal(Eigen::MatrixXd& components, Eigen::Index c) {
  const Eigen::Index d = components.rows();
  double best_norm = -1.0;
  Eigen::VectorXd best;
  for (Eigen::Index e = 0; e < d; ++e) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(d, e);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < c; ++j) v -= components.col(j).dot(v) * components.col(j);
    }
    const double norm = v.norm();
    if (norm > best_norm) {
      best_norm = norm;
      best = v / norm;
    }
    if (norm > 0.5) break;
  }
  components.col(c) = best;
}

}  // namespace

PcaModel pca_fit(const Eigen::MatrixXd& X, int k) {
  const auto n = static_cast<int>(X.rows());
  const auto d = static_cast<int>(X.cols());
  if (n < 2) throw DomainError(fmt::format("pca_fit: need at least 2 samples, got {}", n));
  if (k < 1 || k > std::min(n - 1, d)) {
    throw DomainError(fmt::format("pca_fit: k={} outside [1, {}]", k, std::min(n - 1, d)));
  }
  if (!X.allFinite()) throw DomainError("pca_fit: non-finite input");

  PcaModel model;
  model.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
  const double denom = n - 1.0;

  model.components.resize(d, k);
  model.explained_variance.resize(k);
  Eigen::VectorXd eigvals;
  if (d <= n) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw FitError("pca_fit: eigensolver failed");
    eigvals = solver.eigenvalues().reverse();
    model.components = solver.eigenvectors().rowwise().reverse().leftCols(k);
  } else {
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) throw FitError("pca_fit: eigensolver failed");
    eigvals = solver.eigenvalues().reverse();
    const Eigen::MatrixXd u = solver.eigenvectors().rowwise().reverse().leftCols(k);
    model.components = centered.transpose() * u;
  }

  const double top = std::max(eigvals(0), 0.0);
  const double floor = top * 1e-12 * std::max(n, d);
  for (int c = 0; c < k; ++c) {
    double var = eigvals(c);
    if (!(var > floor)) {
      model.rank_deficient = true;
      var = 0.0;
      complete_orthonormal(model.components, c);
    } else if (d > n) {
      model.components.col(c).normalize();
    }
    model.explained_variance(c) = var;
  }
  fix_signs(model.components);
  return model;
}

FeatureVector pca_transform(const PcaModel& model, const FeatureVector& x) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw DomainError(fmt::format("pca_transform: input dim {} but model expects {}", x.size(),
                                  model.input_dim()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.values.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::VectorXd z = model.components.transpose() * (v - model.mean);
  return {std::vector<double>(z.data(), z.data() + z.size()), Provenance::PCA};
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.input_dim()) {
    throw DomainError(fmt::format("pca_transform: input dim {} but model expects {}", X.cols(),
                                  model.input_dim()));
  }
  return (X.rowwise() - model.mean.transpose()) * model.components;
}

Eigen::MatrixXd pca_inverse_transform(const PcaModel& model, const Eigen::MatrixXd& Z) {
  if (Z.cols() != model.output_dim()) {
    throw DomainError("pca_inverse_transform: dimension mismatch");
  }
  return (Z * model.components.transpose()).rowwise() + model.mean.transpose();
}

// ---------------------------------------------------------------------------
// Pair features

FeatureVector image_features(const GrayImage& img, const std::string& image_id,
                             const ExtractorConfig& cfg) {
  switch (cfg.kind) {
    case Extractor::LBP:
      return lbp_histogram(img, cfg.lbp_grid);
    case Extractor::HOG:
      return hog_descriptor(img, cfg.hog);
    case Extractor::Embedding:
      if (cfg.embeddings == nullptr) throw DomainError("embedding extractor without a table");
      return cfg.embeddings->at(image_id);
  }
  throw DomainError("unknown extractor");
}

FeatureVector pair_features(const PressPair& pair, const ExtractorConfig& cfg,
                            const PcaModel* pca) {
  auto first = image_features(pair.first, pair.first_id, cfg);
  const auto second = image_features(pair.second, pair.second_id, cfg);
  FeatureVector out{std::move(first.values), first.provenance};
  out.values.insert(out.values.end(), second.values.begin(), second.values.end());
  if (pca != nullptr) return pca_transform(*pca, out);
  return out;
}

Eigen::MatrixXd stack_rows(std::span<const FeatureVector> rows) {
  if (rows.empty()) return {};
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d) {
      throw DomainError("stack_rows: ragged feature vectors");
    }
    X.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(rows[i].values.data(), d);
  }
  return X;
}

}  // namespace pupguard
