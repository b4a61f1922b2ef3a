#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "pupguard/classify.hpp"
#include "pupguard/error.hpp"

namespace pupguard {

double auto_gamma(const SampleMatrix& X) {
  if (X.rows() == 0 || X.cols() == 0) return 1.0;
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const double mean_var =
      (X.rowwise() - mean).array().square().colwise().sum().mean() / static_cast<double>(X.rows());
  if (!(mean_var > 0.0) || !std::isfinite(mean_var)) return 1.0;
  return 1.0 / (static_cast<double>(X.cols()) * mean_var);
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::exp(-gamma * sq);
}

namespace {

Eigen::MatrixXd kernel_matrix(const SampleMatrix& X, double gamma) {
  const Eigen::VectorXd norms = X.rowwise().squaredNorm();
  Eigen::MatrixXd K = X * X.transpose();
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      const double sq = std::max(0.0, norms(i) + norms(j) - 2.0 * K(i, j));
      K(i, j) = std::exp(-gamma * sq);
    }
    K(i, i) = 1.0;
  }
  return K;
}

}  // namespace

OcSvmDual ocsvm_solve_dual(const SampleMatrix& X, const OcSvmParams& params) {
  const auto n = static_cast<int>(X.rows());
  if (n < 2) throw FitError(fmt::format("ocsvm: need at least 2 samples, got {}", n));
  if (!(params.nu > 0.0 && params.nu <= 1.0)) {
    throw DomainError(fmt::format("ocsvm: nu={} outside (0, 1]", params.nu));
  }
  if (!X.allFinite()) throw DomainError("ocsvm: non-finite training input");
  if (params.gamma && !(*params.gamma > 0.0)) throw DomainError("ocsvm: gamma must be positive");

  OcSvmDual dual;
  dual.gamma = params.gamma.value_or(auto_gamma(X));
  const double C = 1.0 / (params.nu * n);
  dual.upper_bound = C;
  const Eigen::MatrixXd Q = kernel_matrix(X, dual.gamma);

  // Feasible start: fill the first floor(nu n) coordinates to the bound and
  // put the remainder on the next one.
  auto& alpha = dual.alpha;
  alpha.assign(n, 0.0);
  double remaining = 1.0;
  for (int i = 0; i < n && remaining > 0.0; ++i) {
    alpha[i] = std::min(C, remaining);
    remaining -= alpha[i];
    if (remaining < 1e-15) remaining = 0.0;
  }

  Eigen::VectorXd G = Q * Eigen::Map<const Eigen::VectorXd>(alpha.data(), n);
  const std::int64_t max_iter = params.max_iter > 0 ? params.max_iter : std::int64_t{10000} * n;

  // Maximal violating pair: i can grow (alpha_i < C) with smallest gradient,
  // j can shrink (alpha_j > 0) with largest gradient.
  while (true) {
    int i = -1, j = -1;
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      if (alpha[t] < C && G(t) < g_min) {
        g_min = G(t);
        i = t;
      }
      if (alpha[t] > 0.0 && G(t) > g_max) {
        g_max = G(t);
        j = t;
      }
    }
    dual.max_violation = (i < 0 || j < 0) ? 0.0 : g_max - g_min;
    if (dual.max_violation <= params.tol) break;
    if (dual.iterations >= max_iter) {
      throw ConvergenceError(
          fmt::format("ocsvm: no convergence after {} iterations (violation {:.3e})",
                      dual.iterations, dual.max_violation),
          dual.max_violation);
    }
    ++dual.iterations;

    double quad = Q(i, i) + Q(j, j) - 2.0 * Q(i, j);
    if (quad <= 0.0) quad = 1e-12;
    const double room_i = C - alpha[i];
    const double room_j = alpha[j];
    const double delta = std::min({(g_max - g_min) / quad, room_i, room_j});
    // Snap to the bounds exactly so the active sets stay clean.
    alpha[i] = delta == room_i ? C : alpha[i] + delta;
    alpha[j] = delta == room_j ? 0.0 : alpha[j] - delta;
    G += delta * (Q.col(i) - Q.col(j));
  }

  double free_sum = 0.0;
  int free_count = 0;
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < n; ++t) {
    if (alpha[t] >= C) {
      lb = std::max(lb, G(t));
    } else if (alpha[t] <= 0.0) {
      ub = std::min(ub, G(t));
    } else {
      free_sum += G(t);
      ++free_count;
    }
  }
  if (free_count > 0) {
    dual.rho = free_sum / free_count;
  } else if (std::isfinite(ub) && std::isfinite(lb)) {
    dual.rho = 0.5 * (ub + lb);
  } else {
    dual.rho = std::isfinite(ub) ? ub : lb;
  }
  return dual;
}

OcSvmModel ocsvm_fit(const SampleMatrix& X, const OcSvmParams& params) {
  const OcSvmDual dual = ocsvm_solve_dual(X, params);
  OcSvmModel model;
  model.rho = dual.rho;
  model.gamma = dual.gamma;
  model.nu = params.nu;
  std::vector<Eigen::Index> sv;
  for (std::size_t t = 0; t < dual.alpha.size(); ++t) {
    if (dual.alpha[t] > 0.0) sv.push_back(static_cast<Eigen::Index>(t));
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
  model.alphas.reserve(sv.size());
  for (std::size_t r = 0; r < sv.size(); ++r) {
    model.support_vectors.row(static_cast<Eigen::Index>(r)) = X.row(sv[r]);
    model.alphas.push_back(dual.alpha[static_cast<std::size_t>(sv[r])]);
  }
  // Free support vectors sit on the boundary only up to the solver tolerance.
  // Take rho as the smallest of their exactly recomputed kernel sums so every
  // one of them scores >= 0 under decision().
  const double C = dual.upper_bound;
  double lowest = std::numeric_limits<double>::infinity();
  model.rho = 0.0;
  for (std::size_t t = 0; t < dual.alpha.size(); ++t) {
    if (dual.alpha[t] > 0.0 && dual.alpha[t] < C) {
      const Eigen::RowVectorXd x = X.row(static_cast<Eigen::Index>(t));
      lowest = std::min(lowest, model.decision({x.data(), static_cast<std::size_t>(x.size())}));
    }
  }
  model.rho = std::isfinite(lowest) ? lowest : dual.rho;
  return model;
}

double OcSvmModel::decision(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != support_vectors.cols()) {
    throw DomainError(
        fmt::format("ocsvm: input dim {} but model dim {}", x.size(), support_vectors.cols()));
  }
  const Eigen::Map<const Eigen::RowVectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  double sum = 0.0;
  for (Eigen::Index r = 0; r < support_vectors.rows(); ++r) {
    sum += alphas[static_cast<std::size_t>(r)] *
           std::exp(-gamma * (support_vectors.row(r) - v).squaredNorm());
  }
  return sum - rho;
}

double ocsvm_score(const OcSvmModel& model, std::span<const double> x) {
  return model.decision(x);
}

}  // namespace pupguard
