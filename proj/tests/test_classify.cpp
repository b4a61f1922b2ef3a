#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "pupguard/classify.hpp"
#include "pupguard/error.hpp"

using namespace pupguard;

namespace {

SampleMatrix gaussian(int n, int d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  SampleMatrix X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = g(rng);
  return X;
}

std::vector<double> row(const SampleMatrix& X, Eigen::Index i) {
  std::vector<double> r(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) r[j] = X(i, j);
  return r;
}

OcSvmParams with_nu(double nu) {
  OcSvmParams p;
  p.nu = nu;
  return p;
}

std::vector<std::vector<double>> rows_of(const SampleMatrix& X) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.push_back(row(X, i));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("ocsvm: two identical points") {
  SampleMatrix X(2, 2);
  X << 1.0, 1.0, 1.0, 1.0;
  const auto dual = ocsvm_solve_dual(X, {1.0, 0.5});
  CHECK(dual.alpha == std::vector<double>{0.5, 0.5});
  CHECK(dual.rho == doctest::Approx(1.0));
  const auto m = ocsvm_fit(X, {1.0, 0.5});
  const std::vector<double> same{1.0, 1.0}, far{100.0, -100.0};
  CHECK(m.decision(same) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(m.decision(far) == doctest::Approx(-m.rho));
}

TEST_CASE("ocsvm: dual solution satisfies the optimality conditions") {
  const auto X = gaussian(500, 2, 7);
  OcSvmParams p;
  p.nu = 0.1;
  const auto dual = ocsvm_solve_dual(X, p);
  const auto kkt =
      oracle::check_ocsvm_kkt(rows_of(X), dual.alpha, dual.rho, dual.gamma, dual.upper_bound);
  CHECK(kkt.sum_error < 1e-12);
  CHECK(kkt.box_violation == 0.0);
  CHECK(kkt.stationarity < 1e-5);
  CHECK(dual.max_violation <= p.tol);
  CHECK(dual.gamma == doctest::Approx(auto_gamma(X)));
}

TEST_CASE("ocsvm: nu bounds outliers and support vectors") {
  const auto X = gaussian(500, 2, 8);
  for (double nu : {0.05, 0.1, 0.3}) {
    const auto dual = ocsvm_solve_dual(X, with_nu(nu));
    const auto m = ocsvm_fit(X, with_nu(nu));
    int outliers = 0, svs = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const auto r = row(X, i);
      if (m.decision(r) < -1e-6) ++outliers;
      if (dual.alpha[static_cast<std::size_t>(i)] > 0) ++svs;
    }
    CHECK(outliers <= nu * 500 + 1);
    CHECK(svs >= nu * 500 - 1e-9);
    CHECK(static_cast<int>(m.alphas.size()) == svs);
  }
}

TEST_CASE("ocsvm: free support vectors sit on the boundary") {
  const auto X = gaussian(200, 3, 9);
  const auto dual = ocsvm_solve_dual(X, with_nu(0.2));
  const auto m = ocsvm_fit(X, with_nu(0.2));
  int free = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double a = dual.alpha[static_cast<std::size_t>(i)];
    if (a > 0 && a < dual.upper_bound) {
      ++free;
      CHECK(std::abs(m.decision(row(X, i))) < 1e-5);
    }
  }
  CHECK(free > 0);
  const std::vector<double> far{50.0, 50.0, 50.0};
  CHECK(m.decision(far) == doctest::Approx(-m.rho).epsilon(1e-12));
  const std::vector<double> centre{0.0, 0.0, 0.0};
  CHECK(m.decision(centre) > 0.0);
}

TEST_CASE("ocsvm: training order does not change the decision function") {
  const auto X = gaussian(120, 2, 10);
  SampleMatrix Y = X.colwise().reverse();
  OcSvmParams p{0.1, 0.7, 1e-9};
  const auto a = ocsvm_fit(X, p), b = ocsvm_fit(Y, p);
  const auto probes = gaussian(30, 2, 11, 2.0);
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    CHECK(a.decision(row(probes, i)) == doctest::Approx(b.decision(row(probes, i))).epsilon(1e-6));
  }
}

TEST_CASE("ocsvm: argument checks") {
  const auto X = gaussian(10, 2, 1);
  CHECK_THROWS_AS(ocsvm_fit(X.topRows(1)), FitError);
  CHECK_THROWS_AS(ocsvm_fit(X, with_nu(0.0)), DomainError);
  CHECK_THROWS_AS(ocsvm_fit(X, with_nu(1.5)), DomainError);
  CHECK_THROWS_AS(ocsvm_fit(X, {0.5, -1.0}), DomainError);
  OcSvmParams tiny{0.1, 1.0, 1e-12, 1};
  CHECK_THROWS_AS(ocsvm_fit(gaussian(50, 2, 3), tiny), ConvergenceError);
  const auto m = ocsvm_fit(X);
  CHECK_THROWS_AS(m.decision(std::vector<double>{1.0}), DomainError);
}

// ---------------------------------------------------------------------------

TEST_CASE("iforest: average path length") {
  CHECK(average_path_length(0) == 0.0);
  CHECK(average_path_length(1) == 0.0);
  CHECK(average_path_length(2) == 1.0);
  CHECK(average_path_length(3) == doctest::Approx(2.0 * 1.5 - 4.0 / 3.0));
  // Large n: harmonic number ~ ln(n) + Euler-Mascheroni.
  const double n = 256;
  const double m = n - 1;
  const double harmonic = std::log(m) + std::numbers::egamma + 1.0 / (2 * m) - 1.0 / (12 * m * m);
  CHECK(average_path_length(256) == doctest::Approx(2.0 * harmonic - 2.0 * m / n).epsilon(1e-9));
}

TEST_CASE("iforest: score mapping") {
  CHECK(isolation_score(average_path_length(256), 256) == doctest::Approx(0.5));
  CHECK(isolation_score(0.0, 256) == 1.0);
  double prev = 2.0;
  for (double h = 0.0; h < 30.0; h += 0.5) {
    const double s = isolation_score(h, 64);
    CHECK(s < prev);
    CHECK(s > 0.0);
    CHECK(s <= 1.0);
    prev = s;
  }
}

TEST_CASE("iforest: two points give one split per tree") {
  SampleMatrix X(2, 1);
  X << 0.0, 1.0;
  const auto m = iforest_fit(X, {10, 256, 1});
  CHECK(m.psi == 2);
  CHECK(m.height_limit == 1);
  for (const auto& t : m.trees) {
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].split > 0.0);
    CHECK(t.nodes[0].split <= 1.0);
    CHECK(t.depth() == 1);
  }
}

TEST_CASE("iforest: deterministic per seed") {
  const auto X = gaussian(300, 4, 12);
  const auto a = iforest_fit(X, {50, 64, 5});
  const auto b = iforest_fit(X, {50, 64, 5});
  const auto c = iforest_fit(X, {50, 64, 6});
  const auto probe = row(gaussian(1, 4, 13), 0);
  CHECK(iforest_score(a, probe) == iforest_score(b, probe));
  CHECK(iforest_score(a, probe) != iforest_score(c, probe));
  for (const auto& t : a.trees) CHECK(t.depth() <= a.height_limit);
}

TEST_CASE("iforest: constant data cannot be split") {
  SampleMatrix X = SampleMatrix::Constant(40, 3, 2.5);
  const auto m = iforest_fit(X, {20, 16, 1});
  for (const auto& t : m.trees) CHECK(t.nodes.size() == 1);
  CHECK(iforest_score(m, std::vector<double>{2.5, 2.5, 2.5}) == doctest::Approx(0.5));
  CHECK(iforest_score(m, std::vector<double>{9.0, -9.0, 0.0}) == doctest::Approx(0.5));
}

TEST_CASE("iforest: an isolated point outscores the cluster") {
  SampleMatrix X = gaussian(201, 2, 14);
  X.row(200) << 20.0, 20.0;
  const auto m = iforest_fit(X, {100, 256, 3});
  const double isolated = iforest_score(m, row(X, 200));
  CHECK(isolated > 0.65);
  for (Eigen::Index i = 0; i < 200; ++i) CHECK(iforest_score(m, row(X, i)) < isolated);
  CHECK(iforest_score(m, std::vector<double>{0.0, 0.0}) < 0.5);
}

TEST_CASE("iforest: argument checks") {
  CHECK_THROWS_AS(iforest_fit(gaussian(1, 2, 1)), FitError);
  CHECK_THROWS_AS(iforest_fit(gaussian(10, 2, 1), {0}), DomainError);
  const auto m = iforest_fit(gaussian(10, 2, 1));
  CHECK_THROWS_AS(iforest_score(m, std::vector<double>{1.0}), DomainError);
}

// ---------------------------------------------------------------------------

TEST_CASE("lof: regular pentagon is uniformly dense") {
  SampleMatrix X(5, 2);
  for (int i = 0; i < 5; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 5.0;
    X.row(i) << std::cos(a), std::sin(a);
  }
  const auto m = lof_fit(X, {2});
  for (int i = 0; i < 5; ++i) CHECK(lof_score(m, row(X, i)) == doctest::Approx(1.0).epsilon(1e-12));
  // The centre is closer than every k-distance, so its reachability matches.
  CHECK(lof_score(m, std::vector<double>{0.0, 0.0}) == doctest::Approx(1.0));
}

TEST_CASE("lof: neighbours break ties by index") {
  SampleMatrix X(4, 1);
  X << 0.0, 1.0, 2.0, 3.0;
  const auto m = lof_fit(X, {1});
  CHECK(m.neighbors[1] == std::vector<int>{0});
  CHECK(m.neighbors[2] == std::vector<int>{1});
  CHECK(m.neighbors[0] == std::vector<int>{1});
  for (double kd : m.k_distances) CHECK(kd == 1.0);
}

TEST_CASE("lof: duplicates are capped, not infinite") {
  SampleMatrix X = SampleMatrix::Constant(6, 2, 1.0);
  const auto m = lof_fit(X, {3});
  for (double l : m.lrd) CHECK(l == kLrdCap);
  CHECK(lof_score(m, std::vector<double>{1.0, 1.0}) == doctest::Approx(1.0));
  const double far = lof_score(m, std::vector<double>{2.0, 1.0});
  CHECK(std::isfinite(far));
  CHECK(far > 1e6);
}

TEST_CASE("lof: grid interior is near one, far point is large") {
  SampleMatrix X(100, 2);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) X.row(i * 10 + j) << i, j;
  const auto m = lof_fit(X, {8});
  for (int i = 3; i <= 6; ++i) {
    for (int j = 3; j <= 6; ++j) {
      const double s = lof_score(m, std::vector<double>{i + 0.5, j + 0.5});
      CHECK(s >= 0.9);
      CHECK(s <= 1.1);
    }
  }
  CHECK(lof_score(m, std::vector<double>{30.0, 30.0}) > 2.0);
}

TEST_CASE("lof: scores are scale invariant") {
  const auto X = gaussian(60, 3, 15);
  const auto probes = gaussian(10, 3, 16, 2.0);
  const auto a = lof_fit(X, {10});
  const auto b = lof_fit(X * 7.0, {10});
  for (Eigen::Index i = 0; i < probes.rows(); ++i) {
    auto p = row(probes, i), q = p;
    for (double& v : q) v *= 7.0;
    CHECK(lof_score(a, p) == doctest::Approx(lof_score(b, q)).epsilon(1e-10));
  }
}

TEST_CASE("lof: argument checks") {
  const auto X = gaussian(5, 2, 1);
  CHECK_THROWS_AS(lof_fit(X, {0}), DomainError);
  CHECK_THROWS_AS(lof_fit(X, {5}), DomainError);
  CHECK_THROWS_AS(lof_fit(X.topRows(1), {1}), FitError);
  // The family-erased model caps k at n - 1.
  ClassifierParams p;
  p.family = Family::Lof;
  const auto m = NoveltyModel::fit(X, p);
  CHECK(std::get<LofModel>(m.get()).k == 4);
}

// ---------------------------------------------------------------------------

TEST_CASE("decision_and truth table") {
  const Verdict n1{"p", 0.3, 0.3, Prediction::Normal};
  const Verdict n2{"p", 0.1, 0.1, Prediction::Normal};
  const Verdict a1{"p", -0.2, -0.2, Prediction::Anomalous};
  const Verdict a2{"p", -0.5, -0.5, Prediction::Anomalous};
  CHECK(decision_and(n1, n2).prediction == Prediction::Normal);
  CHECK(decision_and(n1, n2).score == doctest::Approx(0.1));
  CHECK(decision_and(n1, a1).prediction == Prediction::Anomalous);
  CHECK(decision_and(a1, n1).prediction == Prediction::Anomalous);
  CHECK(decision_and(a1, a2).prediction == Prediction::Anomalous);
  CHECK(decision_and(a1, a2).score == doctest::Approx(-0.5));
  Verdict other = n2;
  other.pair_id = "q";
  CHECK_THROWS_AS(decision_and(n1, other), DomainError);
}

TEST_CASE("novelty model: margin sign matches prediction for every family") {
  const auto X = gaussian(80, 3, 17);
  const auto probes = gaussian(40, 3, 18, 3.0);
  for (Family f : {Family::OcSvm, Family::IForest, Family::Lof}) {
    ClassifierParams p;
    p.family = f;
    const auto m = NoveltyModel::fit(X, p);
    CHECK(m.family() == f);
    CHECK(m.dim() == 3);
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
      const auto v = m.verdict("x", row(probes, i));
      CHECK((v.margin >= 0.0) == (v.prediction == Prediction::Normal));
    }
  }
  CHECK(family_from_name("iforest") == Family::IForest);
  CHECK(family_name(Family::Lof) == "lof");
  CHECK_THROWS_AS(family_from_name("svm"), ParseError);
}

TEST_CASE("novelty model: JSON round trip reproduces scores") {
  const auto X = gaussian(60, 4, 19);
  const auto probes = gaussian(20, 4, 20, 2.0);
  for (Family f : {Family::OcSvm, Family::IForest, Family::Lof}) {
    ClassifierParams p;
    p.family = f;
    p.iforest.trees = 20;
    const auto m = NoveltyModel::fit(X, p);
    const auto text = m.to_json().dump();
    const auto back = NoveltyModel::from_json(nlohmann::json::parse(text));
    CHECK(back.family() == f);
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
      CHECK(back.score(row(probes, i)) == m.score(row(probes, i)));
    }
  }
}

TEST_CASE("novelty model: corrupt documents name the field") {
  ClassifierParams p;
  const auto doc = NoveltyModel::fit(gaussian(20, 2, 21), p).to_json();
  auto message = [](const nlohmann::json& d) {
    try {
      NoveltyModel::from_json(d);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  auto missing_rho = doc;
  missing_rho["params"].erase("rho");
  CHECK(message(missing_rho).find("params.rho") != std::string::npos);
  auto bad_gamma = doc;
  bad_gamma["params"]["gamma"] = "wide";
  CHECK(message(bad_gamma).find("params.gamma") != std::string::npos);
  auto bad_version = doc;
  bad_version["format_version"] = 99;
  CHECK(message(bad_version).find("format_version") != std::string::npos);
  auto bad_family = doc;
  bad_family["family"] = "knn";
  CHECK(message(bad_family).find("knn") != std::string::npos);
  auto ragged = doc;
  ragged["params"]["support_vectors"][0] = nlohmann::json::array({1.0});
  CHECK(message(ragged).find("support_vectors") != std::string::npos);
}
