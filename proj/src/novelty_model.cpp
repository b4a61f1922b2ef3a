#include <algorithm>

#include <fmt/format.h>

#include "pupguard/classify.hpp"
#include "pupguard/error.hpp"

namespace pupguard {

using nlohmann::json;

Verdict decision_and(const Verdict& image_verdict, const Verdict& timing_verdict) {
  if (image_verdict.pair_id != timing_verdict.pair_id) {
    throw DomainError(fmt::format("decision_and: pair ids differ ('{}' vs '{}')",
                                  image_verdict.pair_id, timing_verdict.pair_id));
  }
  Verdict out;
  out.pair_id = image_verdict.pair_id;
  out.margin = std::min(image_verdict.margin, timing_verdict.margin);
  out.score = out.margin;
  const bool normal = image_verdict.prediction == Prediction::Normal &&
                      timing_verdict.prediction == Prediction::Normal;
  out.prediction = normal ? Prediction::Normal : Prediction::Anomalous;
  return out;
}

std::string_view family_name(Family family) {
  switch (family) {
    case Family::OcSvm:
      return "ocsvm";
    case Family::IForest:
      return "iforest";
    case Family::Lof:
      return "lof";
  }
  return "?";
}

Family family_from_name(std::string_view name) {
  if (name == "ocsvm") return Family::OcSvm;
  if (name == "iforest") return Family::IForest;
  if (name == "lof") return Family::Lof;
  throw ParseError(fmt::format("unknown classifier family '{}'", name));
}

NoveltyModel NoveltyModel::fit(const SampleMatrix& X, const ClassifierParams& params) {
  switch (params.family) {
    case Family::OcSvm:
      return NoveltyModel(ocsvm_fit(X, params.ocsvm));
    case Family::IForest:
      return NoveltyModel(iforest_fit(X, params.iforest));
    case Family::Lof: {
      LofParams p = params.lof;
      p.k = std::min(p.k, static_cast<int>(X.rows()) - 1);
      return NoveltyModel(lof_fit(X, p));
    }
  }
  throw DomainError("unknown classifier family");
}

Family NoveltyModel::family() const {
  return static_cast<Family>(model_.index());
}

int NoveltyModel::dim() const {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IsoForestModel>) {
          return m.dim;
        } else {
          return m.dim();
        }
      },
      model_);
}

double NoveltyModel::score(std::span<const double> x) const {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OcSvmModel>) {
          return ocsvm_score(m, x);
        } else if constexpr (std::is_same_v<T, IsoForestModel>) {
          return iforest_score(m, x);
        } else {
          return lof_score(m, x);
        }
      },
      model_);
}

double NoveltyModel::margin(double score) const {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OcSvmModel>) {
          return score;
        } else {
          return m.threshold - score;
        }
      },
      model_);
}

Verdict NoveltyModel::verdict(std::string pair_id, std::span<const double> x) const {
  Verdict v;
  v.pair_id = std::move(pair_id);
  v.score = score(x);
  v.margin = margin(v.score);
  v.prediction = v.margin >= 0.0 ? Prediction::Normal : Prediction::Anomalous;
  return v;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Reads doc[key] as T, naming the dotted path on failure.
template <typename T>
T field(const json& doc, const char* key, const std::string& path) {
  const std::string where = path.empty() ? key : path + "." + key;
  if (!doc.is_object() || !doc.contains(key)) {
    throw ParseError(fmt::format("model: missing field '{}'", where));
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(fmt::format("model: invalid field '{}'", where));
  }
}

Eigen::MatrixXd matrix_field(const json& doc, const char* key, const std::string& path,
                             int expected_cols) {
  const auto rows = field<std::vector<std::vector<double>>>(doc, key, path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), expected_cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != expected_cols) {
      throw ParseError(fmt::format("model: invalid field '{}.{}' (row {} has {} values, dim {})",
                                   path, key, r, rows[r].size(), expected_cols));
    }
    for (int c = 0; c < expected_cols; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
  }
  return m;
}

void require(bool ok, const std::string& path, const char* key, const char* why) {
  if (!ok) throw ParseError(fmt::format("model: invalid field '{}.{}' ({})", path, key, why));
}

}  // namespace

json NoveltyModel::to_json() const {
  json params;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, OcSvmModel>) {
          params["dim"] = m.dim();
          params["gamma"] = m.gamma;
          params["nu"] = m.nu;
          params["rho"] = m.rho;
          params["alphas"] = m.alphas;
          params["support_vectors"] = matrix_to_json(m.support_vectors);
        } else if constexpr (std::is_same_v<T, IsoForestModel>) {
          params["dim"] = m.dim;
          params["psi"] = m.psi;
          params["n_train"] = m.n_train;
          params["height_limit"] = m.height_limit;
          params["seed"] = m.seed;
          params["threshold"] = m.threshold;
          json trees = json::array();
          for (const auto& tree : m.trees) {
            json t;
            std::vector<int> feature, left, right, size;
            std::vector<double> split;
            for (const auto& node : tree.nodes) {
              feature.push_back(node.feature);
              split.push_back(node.split);
              left.push_back(node.left);
              right.push_back(node.right);
              size.push_back(node.size);
            }
            t["feature"] = feature;
            t["split"] = split;
            t["left"] = left;
            t["right"] = right;
            t["size"] = size;
            trees.push_back(std::move(t));
          }
          params["trees"] = std::move(trees);
        } else {
          params["dim"] = m.dim();
          params["k"] = m.k;
          params["threshold"] = m.threshold;
          params["k_distances"] = m.k_distances;
          params["lrd"] = m.lrd;
          params["neighbors"] = m.neighbors;
          params["train_points"] = matrix_to_json(m.train_points);
        }
      },
      model_);
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["family"] = std::string(family_name(family()));
  doc["params"] = std::move(params);
  return doc;
}

NoveltyModel NoveltyModel::from_json(const json& doc) {
  const int version = field<int>(doc, "format_version", "");
  if (version != kModelFormatVersion) {
    throw ParseError(fmt::format("model: invalid field 'format_version' ({} unsupported)", version));
  }
  const auto family = family_from_name(field<std::string>(doc, "family", ""));
  if (!doc.contains("params") || !doc["params"].is_object()) {
    throw ParseError("model: missing field 'params'");
  }
  const json& p = doc["params"];
  const std::string path = "params";
  const int dim = field<int>(p, "dim", path);
  require(dim >= 1, path, "dim", "must be >= 1");

  switch (family) {
    case Family::OcSvm: {
      OcSvmModel m;
      m.gamma = field<double>(p, "gamma", path);
      m.nu = field<double>(p, "nu", path);
      m.rho = field<double>(p, "rho", path);
      m.alphas = field<std::vector<double>>(p, "alphas", path);
      m.support_vectors = matrix_field(p, "support_vectors", path, dim);
      require(m.gamma > 0.0, path, "gamma", "must be positive");
      require(static_cast<Eigen::Index>(m.alphas.size()) == m.support_vectors.rows(), path,
              "alphas", "length differs from support_vectors");
      return NoveltyModel(std::move(m));
    }
    case Family::IForest: {
      IsoForestModel m;
      m.dim = dim;
      m.psi = field<int>(p, "psi", path);
      m.n_train = field<int>(p, "n_train", path);
      m.height_limit = field<int>(p, "height_limit", path);
      m.seed = field<std::uint64_t>(p, "seed", path);
      m.threshold = field<double>(p, "threshold", path);
      require(m.psi >= 2, path, "psi", "must be >= 2");
      const auto trees = field<json>(p, "trees", path);
      require(trees.is_array() && !trees.empty(), path, "trees", "must be a non-empty array");
      for (std::size_t t = 0; t < trees.size(); ++t) {
        const std::string tp = fmt::format("{}.trees[{}]", path, t);
        const auto feature = field<std::vector<int>>(trees[t], "feature", tp);
        const auto split = field<std::vector<double>>(trees[t], "split", tp);
        const auto left = field<std::vector<int>>(trees[t], "left", tp);
        const auto right = field<std::vector<int>>(trees[t], "right", tp);
        const auto size = field<std::vector<int>>(trees[t], "size", tp);
        const std::size_t count = feature.size();
        require(count > 0 && split.size() == count && left.size() == count &&
                    right.size() == count && size.size() == count,
                tp, "feature", "node arrays differ in length");
        IsoTree tree;
        for (std::size_t i = 0; i < count; ++i) {
          const IsoNode node{feature[i], split[i], left[i], right[i], size[i]};
          if (node.feature >= 0) {
            require(node.feature < dim, tp, "feature", "index out of range");
            require(node.left > static_cast<int>(i) && node.left < static_cast<int>(count) &&
                        node.right > static_cast<int>(i) && node.right < static_cast<int>(count),
                    tp, "left", "child index out of range");
          }
          tree.nodes.push_back(node);
        }
        m.trees.push_back(std::move(tree));
      }
      return NoveltyModel(std::move(m));
    }
    case Family::Lof: {
      LofModel m;
      m.k = field<int>(p, "k", path);
      m.threshold = field<double>(p, "threshold", path);
      m.k_distances = field<std::vector<double>>(p, "k_distances", path);
      m.lrd = field<std::vector<double>>(p, "lrd", path);
      m.neighbors = field<std::vector<std::vector<int>>>(p, "neighbors", path);
      m.train_points = matrix_field(p, "train_points", path, dim);
      const auto n = static_cast<std::size_t>(m.train_points.rows());
      require(m.k >= 1 && static_cast<std::size_t>(m.k) < n, path, "k", "out of range");
      require(m.k_distances.size() == n, path, "k_distances", "length differs from train_points");
      require(m.lrd.size() == n, path, "lrd", "length differs from train_points");
      require(m.neighbors.size() == n, path, "neighbors", "length differs from train_points");
      return NoveltyModel(std::move(m));
    }
  }
  throw ParseError("model: invalid field 'family'");
}

}  // namespace pupguard
