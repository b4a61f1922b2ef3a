#include "pupguard/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pupguard/config.hpp"
#include "pupguard/error.hpp"

namespace pupguard {

using nlohmann::json;

std::string_view fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::Concat:
      return "concat";
    case FusionMode::Cross:
      return "cross";
    case FusionMode::None:
      return "none";
    case FusionMode::TimingOnly:
      return "timing_only";
  }
  return "?";
}

FusionMode fusion_mode_from_name(std::string_view name) {
  if (name == "concat") return FusionMode::Concat;
  if (name == "cross") return FusionMode::Cross;
  if (name == "none") return FusionMode::None;
  if (name == "timing_only") return FusionMode::TimingOnly;
  throw ParseError(fmt::format("unknown fusion mode '{}'", name));
}

std::string_view extractor_name(Extractor kind) {
  switch (kind) {
    case Extractor::LBP:
      return "lbp";
    case Extractor::HOG:
      return "hog";
    case Extractor::Embedding:
      return "embedding";
  }
  return "?";
}

Extractor extractor_from_name(std::string_view name) {
  if (name == "lbp") return Extractor::LBP;
  if (name == "hog") return Extractor::HOG;
  if (name == "embedding") return Extractor::Embedding;
  throw ParseError(fmt::format("unknown extractor '{}'", name));
}

void PipelineConfig::validate() const {
  if (extractor == Extractor::Embedding && !embeddings && embedding_file.empty()) {
    throw DomainError("config: extractor=embedding requires embedding_file");
  }
  if (pca_k < -1) throw DomainError(fmt::format("config: pca_k={} invalid", pca_k));
  if (!std::isfinite(cross_offset)) throw DomainError("config: cross_offset must be finite");
  if (lbp_grid < 1) throw DomainError("config: lbp_grid must be >= 1");
}

std::shared_ptr<const EmbeddingTable> resolve_embeddings(const PipelineConfig& cfg) {
  if (cfg.extractor != Extractor::Embedding) return nullptr;
  if (cfg.embeddings) return cfg.embeddings;
  std::optional<EmbeddingTable> table;
  std::string_view rest = cfg.embedding_file;
  while (true) {
    const auto comma = rest.find(',');
    const std::string file(rest.substr(0, comma));
    if (!table) {
      table = EmbeddingTable::load(file);
    } else {
      table->merge(EmbeddingTable::load(file));
    }
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return std::make_shared<const EmbeddingTable>(std::move(*table));
}

namespace {

bool distance_based(Family family) { return family != Family::IForest; }

bool uses_image(const PipelineConfig& cfg) {
  return cfg.decision_fusion || cfg.fusion != FusionMode::TimingOnly;
}

ExtractorConfig make_extractor(const PipelineConfig& cfg) {
  ExtractorConfig ex;
  ex.kind = cfg.extractor;
  ex.lbp_grid = cfg.lbp_grid;
  ex.hog = cfg.hog;
  ex.embeddings = cfg.embeddings.get();
  return ex;
}

ClassifierParams seeded(ClassifierParams params, std::uint64_t seed) {
  params.iforest.seed = seed;
  return params;
}

json pca_to_json(const PcaModel& pca) {
  json components = json::array();
  for (Eigen::Index c = 0; c < pca.components.cols(); ++c) {
    components.push_back(std::vector<double>(pca.components.col(c).data(),
                                             pca.components.col(c).data() + pca.components.rows()));
  }
  return {{"mean", std::vector<double>(pca.mean.data(), pca.mean.data() + pca.mean.size())},
          {"components", std::move(components)},
          {"explained_variance",
           std::vector<double>(pca.explained_variance.data(),
                               pca.explained_variance.data() + pca.explained_variance.size())},
          {"rank_deficient", pca.rank_deficient}};
}

template <typename T>
T bundle_field(const json& doc, const char* key, const std::string& path) {
  const std::string where = path.empty() ? key : path + "." + key;
  if (!doc.is_object() || !doc.contains(key)) {
    throw ParseError(fmt::format("model bundle: missing field '{}'", where));
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(fmt::format("model bundle: invalid field '{}'", where));
  }
}

PcaModel pca_from_json(const json& doc) {
  PcaModel pca;
  const auto mean = bundle_field<std::vector<double>>(doc, "mean", "pca");
  const auto components = bundle_field<std::vector<std::vector<double>>>(doc, "components", "pca");
  const auto variance = bundle_field<std::vector<double>>(doc, "explained_variance", "pca");
  pca.rank_deficient = bundle_field<bool>(doc, "rank_deficient", "pca");
  if (mean.empty() || components.empty() || variance.size() != components.size()) {
    throw ParseError("model bundle: invalid field 'pca.components' (shape mismatch)");
  }
  pca.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  pca.components.resize(static_cast<Eigen::Index>(mean.size()),
                        static_cast<Eigen::Index>(components.size()));
  for (std::size_t c = 0; c < components.size(); ++c) {
    if (components[c].size() != mean.size()) {
      throw ParseError(fmt::format("model bundle: invalid field 'pca.components[{}]'", c));
    }
    pca.components.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(
        components[c].data(), static_cast<Eigen::Index>(components[c].size()));
  }
  pca.explained_variance =
      Eigen::Map<const Eigen::VectorXd>(variance.data(), static_cast<Eigen::Index>(variance.size()));
  return pca;
}

}  // namespace

FittedPipeline FittedPipeline::fit(const Dataset& train, const PipelineConfig& cfg_in) {
  cfg_in.validate();
  PipelineConfig cfg = cfg_in;
  cfg.embeddings = resolve_embeddings(cfg);

  if (train.size() < 2) {
    throw FitError(fmt::format("training set has {} pairs; need at least 2", train.size()));
  }
  for (const auto& p : train.pairs) {
    if (p.label == Label::Attack) {
      throw ProtocolError(fmt::format(
          "training pair '{}' is labeled attack; one-class training takes legitimate pairs only",
          p.pair_id));
    }
  }

  std::vector<double> intervals;
  intervals.reserve(train.size());
  for (const auto& p : train.pairs) intervals.push_back(press_interval(p));
  FittedPipeline fp(cfg, TimingStandardizer::fit(intervals));
  fp.extractor_ = make_extractor(fp.cfg_);

  std::vector<FeatureVector> images;
  if (uses_image(cfg)) {
    images.reserve(train.size());
    for (const auto& p : train.pairs) images.push_back(fp.image_vector(p));
    if (cfg.pca_k != 0) {
      const auto X = stack_rows(images);
      const int n = static_cast<int>(X.rows()), d = static_cast<int>(X.cols());
      const int k = cfg.pca_k < 0 ? default_pca_k(n, d) : cfg.pca_k;
      fp.pca_ = pca_fit(X, k);
      for (auto& v : images) v = pca_transform(*fp.pca_, v);
    }
  }

  std::vector<std::pair<std::string, ClassifierParams>> plan;
  if (cfg.decision_fusion) {
    plan.emplace_back("image", seeded(cfg.classifier, cfg.seed));
    plan.emplace_back("timing", seeded(cfg.timing_classifier, cfg.seed + 1));
  } else {
    plan.emplace_back("fused", seeded(cfg.classifier, cfg.seed));
  }

  for (const auto& [name, params] : plan) {
    std::vector<FeatureVector> inputs;
    inputs.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      inputs.push_back(fp.channel_input(name, images.empty() ? FeatureVector{} : images[i], intervals[i]));
    }
    std::optional<FeatureScaler> scaler;
    if (cfg.standardize_fused && distance_based(params.family)) {
      scaler = FeatureScaler::fit(inputs);
      for (auto& v : inputs) v = scaler->apply(v);
    }
    auto model = NoveltyModel::fit(stack_rows(inputs), params);
    fp.channels_.push_back(Channel{name, std::move(scaler), std::move(model)});
  }
  return fp;
}

FeatureVector FittedPipeline::image_vector(const PressPair& pair) const {
  if (cfg_.extractor == Extractor::Embedding || !cfg_.otsu) {
    return pair_features(pair, extractor_, pca_ ? &*pca_ : nullptr);
  }
  PressPair masked = pair;
  for (auto* img : {&masked.first, &masked.second}) {
    *img = segment(*img, otsu_threshold(*img), cfg_.polarity, cfg_.binarize).image;
  }
  return pair_features(masked, extractor_, pca_ ? &*pca_ : nullptr);
}

FeatureVector FittedPipeline::channel_input(const std::string& channel, const FeatureVector& image,
                                            double interval) const {
  const double t_star = timing_.apply(interval);
  if (channel == "image") return image;
  if (channel == "timing") return {{t_star}, Provenance::Raw};
  switch (cfg_.fusion) {
    case FusionMode::Concat:
      return fuse_concat(image, t_star).values;
    case FusionMode::Cross:
      return fuse_cross(image, cfg_.cross_raw_timing ? interval : t_star, cfg_.cross_offset).values;
    case FusionMode::None:
      return image;
    case FusionMode::TimingOnly:
      return {{t_star}, Provenance::Raw};
  }
  throw DomainError("unknown fusion mode");
}

PairVerdicts FittedPipeline::detect(const PressPair& pair) const {
  const double interval = press_interval(pair);
  const FeatureVector image = uses_image(cfg_) ? image_vector(pair) : FeatureVector{};
  std::vector<Verdict> verdicts;
  for (const auto& ch : channels_) {
    FeatureVector x = channel_input(ch.name, image, interval);
    if (ch.scaler) x = ch.scaler->apply(x);
    verdicts.push_back(ch.model.verdict(pair.pair_id, x.values));
  }
  PairVerdicts out;
  if (cfg_.decision_fusion) {
    out.image = verdicts.at(0);
    out.timing = verdicts.at(1);
    out.final = decision_and(*out.image, *out.timing);
  } else {
    out.final = verdicts.at(0);
  }
  return out;
}

json FittedPipeline::to_json() const {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  json config = json::object();
  for (const auto& [k, v] : pipeline_config_to_map(cfg_)) config[k] = v;
  doc["config"] = std::move(config);
  doc["timing"] = {{"mu", timing_.mu()}, {"sigma", timing_.sigma()}};
  doc["pca"] = pca_ ? pca_to_json(*pca_) : json(nullptr);
  json channels = json::array();
  for (const auto& ch : channels_) {
    json c;
    c["name"] = ch.name;
    c["scaler"] = ch.scaler ? json{{"mean", ch.scaler->mean()}, {"scale", ch.scaler->scale()}}
                            : json(nullptr);
    c["model"] = ch.model.to_json();
    channels.push_back(std::move(c));
  }
  doc["channels"] = std::move(channels);
  return doc;
}

FittedPipeline FittedPipeline::from_json(const json& doc,
                                         std::shared_ptr<const EmbeddingTable> embeddings) {
  const int version = bundle_field<int>(doc, "format_version", "");
  if (version != kModelFormatVersion) {
    throw ParseError(
        fmt::format("model bundle: invalid field 'format_version' ({} unsupported)", version));
  }
  PipelineConfig cfg;
  {
    const auto config = bundle_field<std::map<std::string, std::string>>(doc, "config", "");
    apply_pipeline_config(cfg, config);
  }
  cfg.embeddings = std::move(embeddings);
  if (cfg.extractor == Extractor::Embedding && !cfg.embeddings) {
    cfg.embeddings = resolve_embeddings(cfg);
  }
  const auto timing = bundle_field<json>(doc, "timing", "");
  const double mu = bundle_field<double>(timing, "mu", "timing");
  const double sigma = bundle_field<double>(timing, "sigma", "timing");
  if (!(sigma > 0.0)) throw ParseError("model bundle: invalid field 'timing.sigma'");

  FittedPipeline fp(cfg, TimingStandardizer(mu, sigma));
  fp.extractor_ = make_extractor(fp.cfg_);
  const auto pca = bundle_field<json>(doc, "pca", "");
  if (!pca.is_null()) fp.pca_ = pca_from_json(pca);

  const auto channels = bundle_field<json>(doc, "channels", "");
  const std::size_t expected = cfg.decision_fusion ? 2 : 1;
  if (!channels.is_array() || channels.size() != expected) {
    throw ParseError(fmt::format("model bundle: invalid field 'channels' (expected {} entries)",
                                 expected));
  }
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::string path = fmt::format("channels[{}]", i);
    const auto name = bundle_field<std::string>(channels[i], "name", path);
    const char* want = cfg.decision_fusion ? (i == 0 ? "image" : "timing") : "fused";
    if (name != want) {
      throw ParseError(fmt::format("model bundle: invalid field '{}.name' ('{}', expected '{}')",
                                   path, name, want));
    }
    std::optional<FeatureScaler> scaler;
    const auto s = bundle_field<json>(channels[i], "scaler", path);
    if (!s.is_null()) {
      scaler = FeatureScaler(bundle_field<std::vector<double>>(s, "mean", path + ".scaler"),
                             bundle_field<std::vector<double>>(s, "scale", path + ".scaler"));
    }
    const auto model_doc = bundle_field<json>(channels[i], "model", path);
    NoveltyModel model = [&] {
      try {
        return NoveltyModel::from_json(model_doc);
      } catch (const ParseError& e) {
        throw ParseError(fmt::format("{} (in {}.model)", e.what(), path));
      }
    }();
    if (scaler && static_cast<int>(scaler->dim()) != model.dim()) {
      throw ParseError(fmt::format("model bundle: invalid field '{}.scaler' (dim mismatch)", path));
    }
    fp.channels_.push_back(Channel{name, std::move(scaler), std::move(model)});
  }
  return fp;
}

PipelineResult evaluate(const FittedPipeline& pipeline, const Dataset& test) {
  PipelineResult result;
  const auto labels = labels_of(test);
  for (const auto& p : test.pairs) {
    if (p.label == Label::Unlabeled) {
      throw ProtocolError(fmt::format("test pair '{}' is unlabeled", p.pair_id));
    }
    auto v = pipeline.detect(p);
    result.verdicts.push_back(v.final);
    if (v.image) result.image_verdicts.push_back(*v.image);
    if (v.timing) result.timing_verdicts.push_back(*v.timing);
  }
  result.report = metrics(confusion(result.verdicts, labels));
  if (pipeline.config().decision_fusion) {
    result.image_report = metrics(confusion(result.image_verdicts, labels));
    result.timing_report = metrics(confusion(result.timing_verdicts, labels));
  }
  return result;
}

PipelineResult run_pipeline(const Dataset& train, const Dataset& test, const PipelineConfig& cfg) {
  return evaluate(FittedPipeline::fit(train, cfg), test);
}

std::vector<SweepRow> sweep(const Dataset& train, const Dataset& test,
                            const std::vector<double>& fractions, const PipelineConfig& cfg,
                            std::uint64_t seed, bool by_subject) {
  if (fractions.empty()) throw DomainError("sweep: no fractions");
  if (!std::is_sorted(fractions.begin(), fractions.end())) {
    throw DomainError("sweep: fractions must be sorted ascending");
  }
  PipelineConfig shared = cfg;
  shared.embeddings = resolve_embeddings(cfg);
  std::vector<SweepRow> rows;
  for (double f : fractions) {
    auto [subset, rest] =
        by_subject ? split_dataset_by_subject(train, f, seed) : split_dataset(train, f, seed);
    SweepRow row;
    row.fraction = f;
    for (const auto& p : subset.pairs) row.train_ids.push_back(p.pair_id);
    row.report = run_pipeline(subset, test, shared).report;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  const auto v = [](const Ratio& r) {
    const auto x = r.value();
    return x ? fmt::format("{:.6f}", *x) : std::string("nan");
  };
  std::string out = "fraction,accuracy,fpr,recall,precision,f1\n";
  for (const auto& row : rows) {
    out += fmt::format("{},{},{},{},{},{}\n", row.fraction, v(row.report.accuracy),
                       v(row.report.fpr), v(row.report.recall), v(row.report.precision),
                       v(row.report.f1));
  }
  return out;
}

}  // namespace pupguard
