#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "pupguard/classify.hpp"
#include "pupguard/error.hpp"

namespace pupguard {

namespace {

struct Neighbor {
  double distance;
  int index;
};

// k nearest training points to `x`, ordered by (distance, index). `skip` is
// excluded (the query point itself during fitting).
std::vector<Neighbor> nearest(const SampleMatrix& train, const Eigen::RowVectorXd& x, int k,
                              int skip) {
  std::vector<Neighbor> all;
  all.reserve(static_cast<std::size_t>(train.rows()));
  for (Eigen::Index r = 0; r < train.rows(); ++r) {
    if (r == skip) continue;
    all.push_back({(train.row(r) - x).norm(), static_cast<int>(r)});
  }
  const auto by_distance = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  std::partial_sort(all.begin(), all.begin() + k, all.end(), by_distance);
  all.resize(static_cast<std::size_t>(k));
  return all;
}

double lrd_from_reach(double reach_sum, int k) {
  const double mean = reach_sum / k;
  return mean > 0.0 ? std::min(1.0 / mean, kLrdCap) : kLrdCap;
}

}  // namespace

LofModel lof_fit(const SampleMatrix& X, const LofParams& params) {
  const auto n = static_cast<int>(X.rows());
  if (n < 2) throw FitError(fmt::format("lof: need at least 2 samples, got {}", n));
  if (params.k < 1 || params.k > n - 1) {
    throw DomainError(fmt::format("lof: k={} outside [1, {}]", params.k, n - 1));
  }
  if (!X.allFinite()) throw DomainError("lof: non-finite training input");

  LofModel model;
  model.train_points = X;
  model.k = params.k;
  model.threshold = params.threshold;
  model.k_distances.resize(static_cast<std::size_t>(n));
  model.neighbors.resize(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> distances(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto nn = nearest(X, X.row(i), model.k, i);
    auto& ids = model.neighbors[static_cast<std::size_t>(i)];
    for (const auto& nb : nn) {
      ids.push_back(nb.index);
      distances[static_cast<std::size_t>(i)].push_back(nb.distance);
    }
    model.k_distances[static_cast<std::size_t>(i)] = nn.back().distance;
  }
  model.lrd.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double reach = 0.0;
    for (int j = 0; j < model.k; ++j) {
      const int b = model.neighbors[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      reach += std::max(model.k_distances[static_cast<std::size_t>(b)],
                        distances[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
    model.lrd[static_cast<std::size_t>(i)] = lrd_from_reach(reach, model.k);
  }
  return model;
}

double lof_score(const LofModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.dim()) {
    throw DomainError(fmt::format("lof: input dim {} but model dim {}", x.size(), model.dim()));
  }
  const Eigen::Map<const Eigen::RowVectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  const auto nn = nearest(model.train_points, v, model.k, -1);
  double reach = 0.0, neighbor_lrd = 0.0;
  for (const auto& nb : nn) {
    reach += std::max(model.k_distances[static_cast<std::size_t>(nb.index)], nb.distance);
    neighbor_lrd += model.lrd[static_cast<std::size_t>(nb.index)];
  }
  const double own = lrd_from_reach(reach, model.k);
  return (neighbor_lrd / model.k) / own;
}

}  // namespace pupguard
