#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace pupguard {

// Samples are matrix rows throughout.
using SampleMatrix = Eigen::MatrixXd;

enum class Prediction { Normal, Anomalous };

struct Verdict {
  std::string pair_id;
  double score = 0.0;
  // Signed normality margin: >= 0 exactly when prediction is Normal. Comparable
  // in sign only across model families.
  double margin = 0.0;
  Prediction prediction = Prediction::Normal;
};

// Logical AND on Normal. The score is the smaller of the two margins.
// Throws DomainError on pair_id mismatch.
Verdict decision_and(const Verdict& image_verdict, const Verdict& timing_verdict);

// ---------------------------------------------------------------------------
// One-class SVM (nu formulation, RBF kernel)

struct OcSvmParams {
  double nu = 0.1;
  std::optional<double> gamma;  // nullopt: 1 / (d * mean per-dimension variance)
  double tol = 1e-6;
  std::int64_t max_iter = 0;    // 0: 10000 * n
};

// Full dual solution over the training set, as returned by the solver.
//   min 1/2 a^T Q a  s.t.  sum a = 1,  0 <= a_i <= 1/(nu n)
struct OcSvmDual {
  std::vector<double> alpha;
  double rho = 0.0;  // mean gradient over free alphas
  double gamma = 0.0;
  double upper_bound = 0.0;   // 1/(nu n)
  std::int64_t iterations = 0;
  double max_violation = 0.0;  // final max_{up} (-G) - min_{low} (-G)
};

double auto_gamma(const SampleMatrix& X);
double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

// Throws ConvergenceError when the iteration cap is hit.
OcSvmDual ocsvm_solve_dual(const SampleMatrix& X, const OcSvmParams& params);

struct OcSvmModel {
  SampleMatrix support_vectors;  // m x d
  std::vector<double> alphas;    // m, all > 0
  double rho = 0.0;
  double gamma = 1.0;
  double nu = 0.1;

  // f(x) = sum_i alpha_i K(s_i, x) - rho; Normal iff f(x) >= 0.
  double decision(std::span<const double> x) const;
  int dim() const { return static_cast<int>(support_vectors.cols()); }
};

OcSvmModel ocsvm_fit(const SampleMatrix& X, const OcSvmParams& params = {});
double ocsvm_score(const OcSvmModel& model, std::span<const double> x);

// ---------------------------------------------------------------------------
// Isolation forest

struct IsoForestParams {
  int trees = 100;
  int psi = 256;  // capped at n
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

struct IsoNode {
  int feature = -1;  // -1 for leaves
  double split = 0.0;
  int left = -1;
  int right = -1;
  int size = 0;  // training points that reached this node
};

struct IsoTree {
  std::vector<IsoNode> nodes;  // nodes[0] is the root
  int depth() const;
};

struct IsoForestModel {
  std::vector<IsoTree> trees;
  int psi = 0;
  int n_train = 0;
  int dim = 0;
  int height_limit = 0;
  std::uint64_t seed = 0;
  double threshold = 0.5;

  double path_length(const IsoTree& tree, std::span<const double> x) const;
  double mean_path_length(std::span<const double> x) const;
};

// Average unsuccessful-search path length of a BST with n nodes:
// 2 H(n-1) - 2 (n-1)/n, with c(1) = c(0) = 0.
double average_path_length(int n);
// 2^(-mean_path / c(psi))
double isolation_score(double mean_path, int psi);

IsoForestModel iforest_fit(const SampleMatrix& X, const IsoForestParams& params = {});
double iforest_score(const IsoForestModel& model, std::span<const double> x);

// ---------------------------------------------------------------------------
// Local outlier factor (novelty mode)

struct LofParams {
  int k = 20;  // capped at n - 1
  double threshold = 1.5;
};

inline constexpr double kLrdCap = 1e12;

struct LofModel {
  SampleMatrix train_points;
  int k = 0;
  std::vector<double> k_distances;
  std::vector<std::vector<int>> neighbors;  // k indices per point, ties by index
  std::vector<double> lrd;
  double threshold = 1.5;

  int dim() const { return static_cast<int>(train_points.cols()); }
};

LofModel lof_fit(const SampleMatrix& X, const LofParams& params = {});
double lof_score(const LofModel& model, std::span<const double> x);

// ---------------------------------------------------------------------------
// Family-erased model

enum class Family { OcSvm, IForest, Lof };

std::string_view family_name(Family family);  // "ocsvm", "iforest", "lof"
Family family_from_name(std::string_view name);

struct ClassifierParams {
  Family family = Family::OcSvm;
  OcSvmParams ocsvm;
  IsoForestParams iforest;
  LofParams lof;
};

class NoveltyModel {
 public:
  using Variant = std::variant<OcSvmModel, IsoForestModel, LofModel>;

  explicit NoveltyModel(Variant model) : model_(std::move(model)) {}

  static NoveltyModel fit(const SampleMatrix& X, const ClassifierParams& params);

  Family family() const;
  int dim() const;
  double score(std::span<const double> x) const;
  // Positive side means normal, for every family.
  double margin(double score) const;
  Verdict verdict(std::string pair_id, std::span<const double> x) const;

  const Variant& get() const { return model_; }

  nlohmann::json to_json() const;
  // Throws ParseError naming the first missing or malformed field.
  static NoveltyModel from_json(const nlohmann::json& doc);

 private:
  Variant model_;
};

inline constexpr int kModelFormatVersion = 1;

}  // namespace pupguard
