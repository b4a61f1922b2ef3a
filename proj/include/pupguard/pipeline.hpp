#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pupguard/classify.hpp"
#include "pupguard/dataset.hpp"
#include "pupguard/eval.hpp"
#include "pupguard/features.hpp"
#include "pupguard/fusion.hpp"
#include "pupguard/preprocess.hpp"

namespace pupguard {

enum class FusionMode {
  Concat,      // image features + t*
  Cross,       // image features * (t* + offset)
  None,        // image features only
  TimingOnly,  // t* only
};

std::string_view fusion_mode_name(FusionMode mode);
FusionMode fusion_mode_from_name(std::string_view name);
std::string_view extractor_name(Extractor kind);
Extractor extractor_from_name(std::string_view name);

struct PipelineConfig {
  Extractor extractor = Extractor::LBP;
  // One file or a comma-separated list merged into one table.
  std::string embedding_file;
  // In-memory table; takes precedence over embedding_file and is not
  // serialized.
  std::shared_ptr<const EmbeddingTable> embeddings;
  int lbp_grid = 1;
  HogParams hog;

  // Otsu masking before LBP/HOG.
  bool otsu = true;
  Polarity polarity = Polarity::DarkForeground;
  bool binarize = false;

  // -1: min(32, n-1, d); 0: no PCA.
  int pca_k = -1;

  FusionMode fusion = FusionMode::Cross;
  double cross_offset = 0.0;
  // Cross with the raw interval in seconds instead of the standardized t*.
  bool cross_raw_timing = false;
  // Per-dimension standardization of classifier inputs (OC-SVM and LOF only).
  bool standardize_fused = true;

  ClassifierParams classifier;
  // Separate image and timing classifiers joined by logical AND; `fusion` is
  // then ignored.
  bool decision_fusion = false;
  ClassifierParams timing_classifier;

  std::uint64_t seed = 0;

  // Throws DomainError on inconsistent settings.
  void validate() const;
};

// One classifier together with the input scaling fitted for it.
struct Channel {
  std::string name;  // "fused", "image" or "timing"
  std::optional<FeatureScaler> scaler;
  NoveltyModel model;
};

struct PairVerdicts {
  Verdict final;
  std::optional<Verdict> image;   // decision fusion only
  std::optional<Verdict> timing;  // decision fusion only
};

// Everything fitted on the training set: timing standardizer, PCA,
// scalers and classifiers.
class FittedPipeline {
 public:
  // Throws ProtocolError if `train` has attack pairs.
  static FittedPipeline fit(const Dataset& train, const PipelineConfig& cfg);

  PairVerdicts detect(const PressPair& pair) const;

  const PipelineConfig& config() const { return cfg_; }
  const TimingStandardizer& timing() const { return timing_; }
  const std::optional<PcaModel>& pca() const { return pca_; }
  const std::vector<Channel>& channels() const { return channels_; }

  // Model bundle: config, preprocessing stats and per-channel models.
  nlohmann::json to_json() const;
  // Throws ParseError naming the offending field.
  static FittedPipeline from_json(const nlohmann::json& doc,
                                  std::shared_ptr<const EmbeddingTable> embeddings = nullptr);

 private:
  FittedPipeline(PipelineConfig cfg, TimingStandardizer timing)
      : cfg_(std::move(cfg)), timing_(timing) {}

  FeatureVector image_vector(const PressPair& pair) const;
  FeatureVector channel_input(const std::string& channel, const FeatureVector& image,
                              double interval) const;

  PipelineConfig cfg_;
  ExtractorConfig extractor_;
  TimingStandardizer timing_;
  std::optional<PcaModel> pca_;
  std::vector<Channel> channels_;
};

struct PipelineResult {
  EvalReport report;
  std::vector<Verdict> verdicts;
  // Filled when decision fusion is on.
  std::optional<EvalReport> image_report;
  std::optional<EvalReport> timing_report;
  std::vector<Verdict> image_verdicts;
  std::vector<Verdict> timing_verdicts;
};

PipelineResult evaluate(const FittedPipeline& pipeline, const Dataset& test);

// Fit on `train` only, score `test`, report.
PipelineResult run_pipeline(const Dataset& train, const Dataset& test, const PipelineConfig& cfg);

struct SweepRow {
  double fraction = 0.0;
  std::vector<std::string> train_ids;
  EvalReport report;
};

// Training prefixes of one seeded shuffle, so smaller fractions train on
// subsets of larger ones. With `by_subject` the shuffle is over subjects.
std::vector<SweepRow> sweep(const Dataset& train, const Dataset& test,
                            const std::vector<double>& fractions, const PipelineConfig& cfg,
                            std::uint64_t seed, bool by_subject = false);

// Header `fraction,accuracy,fpr,recall,precision,f1`.
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Loads the embedding table named by the config, if the extractor needs one.
std::shared_ptr<const EmbeddingTable> resolve_embeddings(const PipelineConfig& cfg);

}  // namespace pupguard
