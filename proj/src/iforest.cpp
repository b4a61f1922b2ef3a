#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "pupguard/classify.hpp"
#include "pupguard/error.hpp"

namespace pupguard {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class TreeBuilder {
 public:
  TreeBuilder(const SampleMatrix& X, int height_limit, std::uint64_t seed)
      : X_(X), height_limit_(height_limit), rng_(seed) {}

  IsoTree build(std::vector<int> rows) {
    IsoTree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  int grow(IsoTree& tree, std::vector<int>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(IsoNode{});
    tree.nodes[id].size = static_cast<int>(rows.size());
    if (depth >= height_limit_ || rows.size() <= 1) return id;

    // Zero-range dimensions are redrawn; after d draws the node is a leaf.
    const auto d = static_cast<int>(X_.cols());
    std::uniform_int_distribution<int> pick_dim(0, d - 1);
    for (int attempt = 0; attempt < d; ++attempt) {
      const int f = pick_dim(rng_);
      double lo = X_(rows[0], f), hi = lo;
      for (int r : rows) {
        lo = std::min(lo, X_(r, f));
        hi = std::max(hi, X_(r, f));
      }
      if (!(hi > lo)) continue;
      double split = std::uniform_real_distribution<double>(lo, hi)(rng_);
      if (split <= lo) split = std::nextafter(lo, hi);

      std::vector<int> left, right;
      for (int r : rows) (X_(r, f) < split ? left : right).push_back(r);
      tree.nodes[id].feature = f;
      tree.nodes[id].split = split;
      rows.clear();
      rows.shrink_to_fit();
      const int l = grow(tree, left, depth + 1);
      const int rr = grow(tree, right, depth + 1);
      tree.nodes[id].left = l;
      tree.nodes[id].right = rr;
      return id;
    }
    return id;
  }

  const SampleMatrix& X_;
  int height_limit_;
  std::mt19937_64 rng_;
};

}  // namespace

int IsoTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int best = 0;
  while (!stack.empty()) {
    const auto [id, depth] = stack.back();
    stack.pop_back();
    best = std::max(best, depth);
    if (nodes[id].feature >= 0) {
      stack.push_back({nodes[id].left, depth + 1});
      stack.push_back({nodes[id].right, depth + 1});
    }
  }
  return best;
}

double average_path_length(int n) {
  if (n <= 1) return 0.0;
  double harmonic = 0.0;
  for (int i = 1; i <= n - 1; ++i) harmonic += 1.0 / i;
  return 2.0 * harmonic - 2.0 * (n - 1.0) / n;
}

double isolation_score(double mean_path, int psi) {
  const double c = average_path_length(psi);
  if (c <= 0.0) return 0.5;
  return std::exp2(-mean_path / c);
}

IsoForestModel iforest_fit(const SampleMatrix& X, const IsoForestParams& params) {
  const auto n = static_cast<int>(X.rows());
  if (n < 2) throw FitError(fmt::format("iforest: need at least 2 samples, got {}", n));
  if (params.trees < 1) throw DomainError("iforest: need at least one tree");
  if (params.psi < 2) throw DomainError("iforest: psi must be >= 2");
  if (!X.allFinite()) throw DomainError("iforest: non-finite training input");

  IsoForestModel model;
  model.psi = std::min(params.psi, n);
  model.n_train = n;
  model.dim = static_cast<int>(X.cols());
  model.seed = params.seed;
  model.threshold = params.threshold;
  model.height_limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(model.psi))));
  model.trees.reserve(static_cast<std::size_t>(params.trees));

  std::vector<int> all(static_cast<std::size_t>(n));
  for (int t = 0; t < params.trees; ++t) {
    const std::uint64_t tree_seed = splitmix64(params.seed ^ splitmix64(static_cast<std::uint64_t>(t)));
    std::mt19937_64 sampler(tree_seed);
    std::iota(all.begin(), all.end(), 0);
    // Partial Fisher-Yates: first psi entries are the subsample.
    for (int i = 0; i < model.psi; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(sampler))]);
    }
    std::vector<int> rows(all.begin(), all.begin() + model.psi);
    TreeBuilder builder(X, model.height_limit, splitmix64(tree_seed));
    model.trees.push_back(builder.build(std::move(rows)));
  }
  return model;
}

double IsoForestModel::path_length(const IsoTree& tree, std::span<const double> x) const {
  int id = 0, depth = 0;
  while (tree.nodes[static_cast<std::size_t>(id)].feature >= 0) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    id = x[static_cast<std::size_t>(node.feature)] < node.split ? node.left : node.right;
    ++depth;
  }
  return depth + average_path_length(tree.nodes[static_cast<std::size_t>(id)].size);
}

double IsoForestModel::mean_path_length(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim) {
    throw DomainError(fmt::format("iforest: input dim {} but model dim {}", x.size(), dim));
  }
  double total = 0.0;
  for (const auto& tree : trees) total += path_length(tree, x);
  return total / static_cast<double>(trees.size());
}

double iforest_score(const IsoForestModel& model, std::span<const double> x) {
  return isolation_score(model.mean_path_length(x), model.psi);
}

}  // namespace pupguard
