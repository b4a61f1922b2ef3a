#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pupguard/dataset.hpp"

namespace pupguard {

enum class Provenance { LBP, HOG, Embedding, PCA, Fused, Raw };

struct FeatureVector {
  std::vector<double> values;
  Provenance provenance = Provenance::Raw;

  std::size_t size() const { return values.size(); }
  bool all_finite() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// ---------------------------------------------------------------------------
// LBP

// 3x3 window, row-major: [0..2] top row, [3..5] middle, [6..8] bottom.
// Bit 7 (MSB) is the right neighbour, then clockwise: bottom-right, bottom,
// bottom-left, left, top-left, top, top-right (LSB). A neighbour >= centre
// sets its bit.
std::uint8_t lbp_code(std::span<const std::uint8_t, 9> patch);

// L1-normalized histogram of LBP codes over interior pixels. With grid > 1
// the interior is split into grid x grid regions and the per-region
// histograms are concatenated (each region normalized separately).
FeatureVector lbp_histogram(const GrayImage& img, int grid = 1);

// ---------------------------------------------------------------------------
// HOG

struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<double> gx, gy;
  std::vector<double> magnitude;    // sqrt(gx^2 + gy^2)
  std::vector<double> orientation;  // degrees, unsigned, [0, 180)
};

// Sobel derivatives scaled by 1/8 (intensity units per pixel), borders
// replicated.
GradientField gradient_field(const GrayImage& img);

struct HogParams {
  int cell = 8;    // pixels
  int block = 2;   // cells
  int stride = 1;  // cells
  int bins = 9;
};

// Per-cell orientation histograms before block normalization, cell-row-major
// then bin. Magnitude is split linearly between the two nearest bin centres.
std::vector<double> hog_cell_histograms(const GradientField& field, const HogParams& params = {});

// Full descriptor: blocks in row-major order, each L2-normalized with
// eps = 1e-5.
FeatureVector hog_descriptor(const GrayImage& img, const HogParams& params = {});

std::size_t hog_length(int width, int height, const HogParams& params = {});

// ---------------------------------------------------------------------------
// External embeddings

// Text file: first line `#dim=<d>`, then `<image_id>,v1,...,vd` per line.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim) : dim_(dim) {}

  static EmbeddingTable load(const std::filesystem::path& file);

  int dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  void insert(const std::string& image_id, std::vector<double> values);
  // Throws LookupError naming the image.
  const FeatureVector& at(const std::string& image_id) const;
  bool contains(const std::string& image_id) const { return rows_.count(image_id) != 0; }
  // Adds every row of `other`; dims must agree and ids must not repeat.
  void merge(const EmbeddingTable& other);
  // Same text format as load(); values round-trip exactly.
  void save(const std::filesystem::path& file) const;

 private:
  int dim_;
  std::map<std::string, FeatureVector> rows_;
};

inline EmbeddingTable load_embeddings(const std::filesystem::path& file) {
  return EmbeddingTable::load(file);
}

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  Eigen::VectorXd mean;                  // d
  Eigen::MatrixXd components;            // d x k, orthonormal columns
  Eigen::VectorXd explained_variance;    // k, non-increasing, divisor n-1
  bool rank_deficient = false;           // trailing components carry zero variance

  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(components.cols()); }
};

// Rows of X are samples. Requires n >= 2 and 1 <= k <= min(n-1, d).
PcaModel pca_fit(const Eigen::MatrixXd& X, int k);
FeatureVector pca_transform(const PcaModel& model, const FeatureVector& x);
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& X);
Eigen::MatrixXd pca_inverse_transform(const PcaModel& model, const Eigen::MatrixXd& Z);

// min(32, n-1, d)
int default_pca_k(int n, int d);

// ---------------------------------------------------------------------------
// Pair to vector

enum class Extractor { LBP, HOG, Embedding };

struct ExtractorConfig {
  Extractor kind = Extractor::LBP;
  int lbp_grid = 1;
  HogParams hog;
  const EmbeddingTable* embeddings = nullptr;  // required for Embedding
};

// Per-image descriptor of an already preprocessed image. For Embedding,
// `image_id` keys into the table and the image is ignored.
FeatureVector image_features(const GrayImage& img, const std::string& image_id,
                             const ExtractorConfig& cfg);

// First-press descriptor followed by second-press descriptor; PCA applied
// when given. Images are used as stored on the pair; see pipeline for the
// Otsu step.
FeatureVector pair_features(const PressPair& pair, const ExtractorConfig& cfg,
                            const PcaModel* pca = nullptr);

Eigen::MatrixXd stack_rows(std::span<const FeatureVector> rows);

}  // namespace pupguard
