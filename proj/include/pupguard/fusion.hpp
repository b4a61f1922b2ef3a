#pragma once

#include <string>
#include <vector>

#include "pupguard/features.hpp"

namespace pupguard {

enum class FusionScheme { Concat, Cross };

struct FusedSample {
  FeatureVector values;
  FusionScheme scheme = FusionScheme::Concat;
  std::string source_pair_id;
};

// Image features followed by t* as the last coordinate.
FusedSample fuse_concat(const FeatureVector& img, double t_star, std::string pair_id = {});

// values[i] = img[i] * (t_star + offset).
FusedSample fuse_cross(const FeatureVector& img, double t_star, double offset = 0.0,
                       std::string pair_id = {});

// Per-dimension standardization fitted on training vectors. Dimensions with
// zero training spread are centred but not scaled.
class FeatureScaler {
 public:
  FeatureScaler() = default;
  FeatureScaler(std::vector<double> mean, std::vector<double> scale);

  static FeatureScaler fit(const std::vector<FeatureVector>& train);

  FeatureVector apply(const FeatureVector& x) const;
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }
  std::size_t dim() const { return mean_.size(); }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

}  // namespace pupguard
