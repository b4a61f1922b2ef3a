// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>

#include <fmt/format.h>

#include "oracles.hpp"
#include "pupguard/classify.hpp"
#include "pupguard/eval.hpp"
#include "pupguard/features.hpp"
#include "pupguard/pipeline.hpp"
#include "pupguard/preprocess.hpp"
#include "pupguard/synthgen.hpp"
#include "test_util.hpp"

using namespace pupguard;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// a/b <= c/d over non-negative integers, exactly.
bool ratio_le(const Ratio& x, const Ratio& y) {
  return static_cast<unsigned __int128>(x.num) * y.den <=
         static_cast<unsigned __int128>(y.num) * x.den;
}

bool ratio_lt(const Ratio& x, const Ratio& y) {
  return static_cast<unsigned __int128>(x.num) * y.den <
         static_cast<unsigned __int128>(y.num) * x.den;
}

SampleMatrix gaussian(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  SampleMatrix X(n, d);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = g(rng);
  return X;
}

std::vector<double> row_of(const SampleMatrix& X, Eigen::Index i) {
  std::vector<double> r(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) r[static_cast<std::size_t>(j)] = X(i, j);
  return r;
}

std::vector<std::vector<double>> rows_of(const SampleMatrix& X) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.push_back(row_of(X, i));
  return out;
}

// ---------------------------------------------------------------------------

Outcome metric_reproduction() {
  const auto r = metrics({40, 1, 52, 1});
  const std::string got = fmt::format("acc {} fpr {} recall {} precision {} f1 {}", r.accuracy_pct(),
                                      r.fpr_pct(), r.recall_pct(), r.precision_pct(), r.f1_text());
  return {got == "acc 97.87% fpr 1.89% recall 97.56% precision 97.56% f1 0.98", got};
}

Outcome otsu_equivalence() {
  std::mt19937_64 rng(2024);
  int mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto img = oracle::random_image(16, 16, rng);
    if (otsu_threshold(img).best_k != oracle::brute_otsu(img).best_k) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} mismatches over 1000 images", mismatches)};
}

Outcome lbp_equivalence() {
  std::mt19937_64 rng(77);
  int mismatches = 0;
  double worst_sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto img = oracle::random_image(8, 8, rng);
    const auto h = lbp_histogram(img);
    if (h.values != oracle::naive_lbp_histogram(img)) ++mismatches;
    double s = 0.0;
    for (double v : h.values) s += v;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  return {mismatches == 0 && worst_sum <= 1e-12,
          fmt::format("{} mismatches, max |sum-1| = {:.2e}", mismatches, worst_sum)};
}

Outcome hog_shape() {
  std::mt19937_64 rng(5);
  std::vector<GrayImage> images{oracle::random_image(160, 160, rng),
                                gen_fingerprint_image(random_profile(1), PressParams{}, 1)};
  std::size_t dims = 0;
  double worst = 0.0;
  bool all_dims = true;
  for (const auto& img : images) {
    const auto h = hog_descriptor(img);
    dims = h.size();
    all_dims = all_dims && dims == 12996;
    for (std::size_t b = 0; b + 36 <= h.size(); b += 36) {
      double sq = 0.0;
      for (std::size_t t = b; t < b + 36; ++t) sq += h.values[t] * h.values[t];
      worst = std::max(worst, std::sqrt(sq));
    }
  }
  return {all_dims && worst <= 1.0 + 1e-6, fmt::format("{} dims, max block norm {:.9f}", dims, worst)};
}

Outcome pca_spectrum() {
  const auto X = gaussian(20, 10, 11);
  const auto model = pca_fit(X, 10);
  const Eigen::MatrixXd Z = pca_transform(model, X);
  const auto eig = oracle::jacobi_eigenvalues(oracle::sample_covariance(rows_of(X)), 10);
  double rel = 0.0;
  for (int c = 0; c < 10; ++c) {
    const double var = Z.col(c).squaredNorm() / 19.0;  // Z is centred
    rel = std::max(rel, std::abs(var - eig[static_cast<std::size_t>(c)]) / eig[static_cast<std::size_t>(c)]);
  }
  const Eigen::MatrixXd gram = model.components.transpose() * model.components;
  const double ortho = (gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff();
  const double recon = (pca_inverse_transform(model, Z) - X).cwiseAbs().maxCoeff();
  return {rel <= 1e-8 && ortho <= 1e-8 && recon <= 1e-8,
          fmt::format("variance rel err {:.2e}, orthonormality {:.2e}, round trip {:.2e}", rel, ortho,
                      recon)};
}

Outcome ocsvm_certificate() {
  double worst_margin = 0.0, min_sv = 1.0, worst_kkt = 0.0, worst_feas = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto X = gaussian(500, 2, 100 + seed);
    OcSvmParams p;
    p.nu = 0.1;
    const auto dual = ocsvm_solve_dual(X, p);
    const auto model = ocsvm_fit(X, p);
    int errors = 0, svs = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (model.decision(row_of(X, i)) < 0.0) ++errors;
      if (dual.alpha[static_cast<std::size_t>(i)] > 0.0) ++svs;
    }
    worst_margin = std::max(worst_margin, errors / 500.0);
    min_sv = std::min(min_sv, svs / 500.0);
    const auto kkt =
        oracle::check_ocsvm_kkt(rows_of(X), dual.alpha, dual.rho, dual.gamma, dual.upper_bound);
    worst_kkt = std::max(worst_kkt, kkt.stationarity);
    worst_feas = std::max({worst_feas, kkt.sum_error, kkt.box_violation});
  }
  return {worst_margin <= 0.12 && min_sv >= 0.08 && worst_kkt <= 1e-5 && worst_feas <= 1e-5,
          fmt::format("max margin-error fraction {:.3f}, min SV fraction {:.3f}, stationarity {:.2e}, "
                      "feasibility {:.2e}",
                      worst_margin, min_sv, worst_kkt, worst_feas)};
}

Outcome iforest_separation() {
  int separated = 0;
  bool in_range = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SampleMatrix X = gaussian(201, 2, 300 + seed);
    X.row(200) << 10.0, 10.0;
    IsoForestParams p;
    p.seed = seed;
    const auto m = iforest_fit(X, p);
    const double probe = iforest_score(m, row_of(X, 200));
    double cluster_max = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double s = iforest_score(m, row_of(X, i));
      in_range = in_range && s > 0.0 && s < 1.0;
      if (i < 200) cluster_max = std::max(cluster_max, s);
    }
    separated += probe > cluster_max;
  }
  return {separated >= 19 && in_range,
          fmt::format("probe above every cluster member in {}/20 seeds; scores in (0,1): {}", separated,
                      in_range)};
}

Outcome lof_calibration() {
  SampleMatrix X(100, 2);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) X.row(i * 10 + j) << i, j;
  const auto m = lof_fit(X);
  double lo = 1e300, hi = 0.0;
  for (int i = 1; i <= 8; ++i) {
    for (int j = 1; j <= 8; ++j) {
      const double s = lof_score(m, std::vector<double>{double(i), double(j)});
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  const double far = lof_score(m, std::vector<double>{4.0, 19.0});
  return {lo >= 0.9 && hi <= 1.1 && far > 2.0,
          fmt::format("interior LOF in [{:.4f}, {:.4f}], probe {:.3f}", lo, hi, far)};
}

// ---------------------------------------------------------------------------
// End-to-end criteria share one synthetic train/test draw.

struct Synthetic {
  TempDir dir{"acceptance"};
  Dataset train, test;
  double gen_seconds = 0.0;

  Synthetic() {
    const auto start = std::chrono::steady_clock::now();
    train = gen_dataset(300, 0, 10, AttackParams{}, 1, dir / "train");
    test = gen_dataset(41, 53, 10, AttackParams{}, 2, dir / "test");
    gen_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

const Synthetic& synthetic() {
  static const Synthetic s;
  return s;
}

PipelineConfig e2e_config(FusionMode mode) {
  PipelineConfig cfg;
  cfg.extractor = Extractor::LBP;
  cfg.classifier.family = Family::OcSvm;
  cfg.fusion = mode;
  cfg.cross_offset = 1.0;
  return cfg;
}

const EvalReport& fused_report() {
  static const EvalReport r =
      run_pipeline(synthetic().train, synthetic().test, e2e_config(FusionMode::Cross)).report;
  return r;
}

Outcome decision_fusion_dominance() {
  auto cfg = e2e_config(FusionMode::Cross);
  cfg.decision_fusion = true;
  const auto r = run_pipeline(synthetic().train, synthetic().test, cfg);
  const auto& img = *r.image_report;
  const auto& tim = *r.timing_report;
  const bool ok = ratio_le(r.report.fpr, img.fpr) && ratio_le(r.report.fpr, tim.fpr) &&
                  ratio_le(r.report.recall, img.recall) && ratio_le(r.report.recall, tim.recall);
  return {ok, fmt::format("FPR and {} image {} timing {}; recall and {} image {} timing {}",
                          r.report.fpr_pct(), img.fpr_pct(), tim.fpr_pct(), r.report.recall_pct(),
                          img.recall_pct(), tim.recall_pct())};
}

Outcome end_to_end() {
  const auto start = std::chrono::steady_clock::now();
  const auto& r = fused_report();
  const double secs = synthetic().gen_seconds +
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = ratio_le(Ratio{90, 100}, r.accuracy) && ratio_le(r.fpr, Ratio{10, 100}) && secs < 60.0;
  return {ok, fmt::format("accuracy {} (need >= 90%), FPR {} (need <= 10%), {:.1f} s incl. generation",
                          r.accuracy_pct(), r.fpr_pct(), secs)};
}

Outcome ablation_trend() {
  const auto& fused = fused_report();
  const auto image =
      run_pipeline(synthetic().train, synthetic().test, e2e_config(FusionMode::None)).report;
  const auto timing =
      run_pipeline(synthetic().train, synthetic().test, e2e_config(FusionMode::TimingOnly)).report;
  const bool ok = ratio_lt(image.accuracy, fused.accuracy) && ratio_lt(timing.accuracy, fused.accuracy);
  return {ok, fmt::format("image-only {}, timing-only {}, fused {}", image.accuracy_pct(),
                          timing.accuracy_pct(), fused.accuracy_pct())};
}

Outcome sweep_machinery() {
  const auto rows = sweep(synthetic().train, synthetic().test, {0.2, 0.4, 0.6, 0.8, 1.0},
                          e2e_config(FusionMode::Cross), 0);
  const auto csv = sweep_csv(rows);
  const auto lines = std::count(csv.begin(), csv.end(), '\n') - 1;
  const std::set<std::string> full(rows.back().train_ids.begin(), rows.back().train_ids.end());
  bool nested = true;
  for (const auto& id : rows.front().train_ids) nested = nested && full.count(id) == 1;
  std::string acc;
  for (const auto& r : rows) acc += fmt::format(" {}", r.report.accuracy_pct());
  return {lines == 5 && nested && rows.front().train_ids.size() == 60,
          fmt::format("{} CSV rows, 0.2 set ({} pairs) nested in 1.0 set: {}; accuracy{}", lines,
                      rows.front().train_ids.size(), nested, acc)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric reproduction", metric_reproduction},
      {"Otsu oracle equivalence", otsu_equivalence},
      {"LBP oracle equivalence", lbp_equivalence},
      {"HOG shape and block norm", hog_shape},
      {"PCA spectral agreement", pca_spectrum},
      {"OC-SVM nu-property and KKT", ocsvm_certificate},
      {"isolation forest separation", iforest_separation},
      {"LOF calibration", lof_calibration},
      {"decision-fusion dominance", decision_fusion_dominance},
      {"synthetic end-to-end", end_to_end},
      {"ablation trend", ablation_trend},
      {"sweep machinery", sweep_machinery},
  };
  // Per-criterion runtime limits in seconds; 0 means none.
  const double limits[] = {1, 5, 0, 0, 0, 30, 0, 0, 0, 0, 0, 0};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limits[i] > 0 && secs >= limits[i]) {
      o.pass = false;
      o.detail += fmt::format("; over the {:.0f} s limit", limits[i]);
    }
    failed += !o.pass;
    fmt::print("{} {:>2}. {}: {} [{:.2f} s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
               o.detail, secs);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
             criteria.size());
  return failed == 0 ? 0 : 1;
}
