#include "pupguard/fusion.hpp"

#include <cmath>

#include <fmt/format.h>

#include "pupguard/error.hpp"

namespace pupguard {

namespace {

void check_inputs(const FeatureVector& img, double t_star) {
  if (!img.all_finite() || !std::isfinite(t_star)) {
    throw DomainError("fusion: non-finite input");
  }
}

}  // namespace

FusedSample fuse_concat(const FeatureVector& img, double t_star, std::string pair_id) {
  check_inputs(img, t_star);
  FusedSample out{{img.values, Provenance::Fused}, FusionScheme::Concat, std::move(pair_id)};
  out.values.values.push_back(t_star);
  return out;
}

FusedSample fuse_cross(const FeatureVector& img, double t_star, double offset,
                       std::string pair_id) {
  check_inputs(img, t_star);
  const double factor = t_star + offset;
  FusedSample out{{img.values, Provenance::Fused}, FusionScheme::Cross, std::move(pair_id)};
  for (double& v : out.values.values) v *= factor;
  return out;
}

FeatureScaler::FeatureScaler(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (mean_.size() != scale_.size()) throw DomainError("FeatureScaler: size mismatch");
}

FeatureScaler FeatureScaler::fit(const std::vector<FeatureVector>& train) {
  if (train.empty()) throw FitError("FeatureScaler: no training vectors");
  const std::size_t d = train.front().size();
  std::vector<double> mean(d, 0.0), scale(d, 0.0);
  for (const auto& x : train) {
    if (x.size() != d) throw DomainError("FeatureScaler: ragged training vectors");
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.values[j];
  }
  const auto n = static_cast<double>(train.size());
  for (double& m : mean) m /= n;
  for (const auto& x : train) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x.values[j] - mean[j];
      scale[j] += c * c;
    }
  }
  for (double& s : scale) {
    s = std::sqrt(s / n);
    if (!(s > 1e-12)) s = 1.0;
  }
  return FeatureScaler(std::move(mean), std::move(scale));
}

FeatureVector FeatureScaler::apply(const FeatureVector& x) const {
  if (x.size() != mean_.size()) {
    throw DomainError(fmt::format("FeatureScaler: input dim {} but fitted on {}", x.size(),
                                  mean_.size()));
  }
  FeatureVector out{x.values, x.provenance};
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    out.values[j] = (out.values[j] - mean_[j]) / scale_[j];
  }
  return out;
}

}  // namespace pupguard
