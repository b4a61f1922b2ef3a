// pupguard: generate synthetic press-pair data, train, evaluate, detect and sweep.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pupguard/config.hpp"
#include "pupguard/error.hpp"
#include "pupguard/pipeline.hpp"
#include "pupguard/synthgen.hpp"

namespace fs = std::filesystem;
using namespace pupguard;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitAnomalous = 1;

struct Globals {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

bool g_verbose = false;

template <typename... Args>
void note(fmt::format_string<Args...> f, Args&&... args) {
  if (g_verbose) fmt::print(stderr, "{}\n", fmt::format(f, std::forward<Args>(args)...));
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// File values first, then --set overrides in order.
ConfigMap layered_config(const Globals& g) {
  ConfigMap map;
  if (!g.config_file.empty()) map = read_config_file(g.config_file);
  for (const auto& kv : g.overrides) {
    const auto parsed = parse_config_text(kv);
    if (parsed.size() != 1) throw ParseError(fmt::format("--set expects key=value, got '{}'", kv));
    for (const auto& [k, v] : parsed) map[k] = v;
  }
  return map;
}

PipelineConfig pipeline_config(const Globals& g, const ConfigMap& map) {
  PipelineConfig cfg;
  apply_pipeline_config(cfg, map);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open model '{}'", path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("model '{}': {}", path.string(), e.what()));
  }
}

std::uint64_t config_u64(const ConfigMap& map, const std::string& key, std::uint64_t fallback) {
  const auto it = map.find(key);
  if (it == map.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(fmt::format("config: key '{}' has invalid value '{}'", key, it->second));
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::optional<int> normal, attack, subjects;
  std::optional<std::uint64_t> population_seed;
  std::string out;
  int embedding_grid = 0;
};

int cmd_gen(const Globals& g, const GenArgs& a) {
  const auto map = layered_config(g);
  AttackParams attack;
  apply_attack_config(attack, map);
  const auto count = [&](const std::optional<int>& flag, const char* key, int fallback) {
    return flag ? *flag : static_cast<int>(config_u64(map, key, static_cast<std::uint64_t>(fallback)));
  };
  const int normal = count(a.normal, "gen.normal", 0);
  const int attacks = count(a.attack, "gen.attack", 0);
  const int subjects = count(a.subjects, "gen.subjects", 10);
  const std::uint64_t seed = g.seed ? *g.seed : config_u64(map, "gen.seed", 0);
  const std::uint64_t population =
      a.population_seed ? *a.population_seed : config_u64(map, "gen.population_seed", 0);

  Stopwatch clock;
  const auto ds = gen_dataset(normal, attacks, subjects, attack, seed, a.out, population);
  std::size_t legit = 0;
  for (const auto& p : ds.pairs) legit += p.label == Label::Legitimate;
  fmt::print("wrote {} pairs ({} legit, {} attack, {} subjects) to {}\n", ds.size(), legit,
             ds.size() - legit, subjects, a.out);
  if (a.embedding_grid > 0) {
    const fs::path file = fs::path(a.out) / "embeddings.txt";
    pooled_embeddings(ds, a.embedding_grid).save(file);
    fmt::print("wrote {}-dim embeddings to {}\n", a.embedding_grid * a.embedding_grid, file.string());
  }
  note("gen: {:.2f} s", clock.seconds());
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string train, model;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  const auto cfg = pipeline_config(g, layered_config(g));
  Stopwatch clock;
  const auto train = load_dataset(a.train);
  note("train: loaded {} pairs in {:.2f} s", train.size(), clock.seconds());
  const auto fitted = FittedPipeline::fit(train, cfg);
  write_text(a.model, fitted.to_json().dump(1) + "\n");
  fmt::print("trained on {} pairs; model written to {}\n", train.size(), a.model);
  note("train: {:.2f} s total", clock.seconds());
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model, train, test, csv;
  bool all_combinations = false;
};

// Keys the user set explicitly must agree with the bundle's stored config.
void check_model_config(const FittedPipeline& fitted, const Globals& g, const ConfigMap& user) {
  PipelineConfig requested;
  apply_pipeline_config(requested, user);
  if (g.seed) requested.seed = *g.seed;
  const auto want = pipeline_config_to_map(requested);
  const auto have = pipeline_config_to_map(fitted.config());
  std::vector<std::string> keys;
  for (const auto& [k, v] : user) keys.push_back(k);
  if (g.seed) keys.push_back("seed");
  for (const auto& k : keys) {
    const auto w = want.find(k);
    if (w == want.end()) continue;  // generator keys
    if (have.at(k) != w->second) {
      throw ProtocolError(fmt::format("model/config mismatch on '{}': model has '{}', config asks '{}'",
                                      k, have.at(k), w->second));
    }
  }
}

std::string pct(const Ratio& r) { return r.defined() ? r.rounded(100, 2) : "nan"; }

int combination_table(const Globals& g, const EvalArgs& a) {
  if (a.train.empty() || a.test.empty()) {
    throw DomainError("--paper-table needs --train and --test");
  }
  const auto base = pipeline_config(g, layered_config(g));
  if (base.embedding_file.empty() && !base.embeddings) {
    throw DomainError("--paper-table covers the embedding extractor; set embedding_file");
  }
  const auto train = load_dataset(a.train);
  const auto test = load_dataset(a.test);
  PipelineConfig shared = base;
  shared.embeddings = resolve_embeddings([&] {
    auto c = base;
    c.extractor = Extractor::Embedding;
    return c;
  }());

  std::string csv = "features,classifier,fusion,accuracy,fpr,recall,precision,f1\n";
  fmt::print("{:<10} {:<8} {:<7} {:>9} {:>8} {:>9} {:>9} {:>5}\n", "features", "clf", "fusion",
             "accuracy", "fpr", "recall", "precision", "f1");
  for (auto extractor : {Extractor::LBP, Extractor::HOG, Extractor::Embedding}) {
    for (auto family : {Family::OcSvm, Family::IForest, Family::Lof}) {
      for (auto fusion : {FusionMode::Concat, FusionMode::Cross}) {
        PipelineConfig cfg = shared;
        cfg.extractor = extractor;
        cfg.classifier.family = family;
        cfg.fusion = fusion;
        Stopwatch clock;
        const auto r = run_pipeline(train, test, cfg).report;
        const auto ex = extractor_name(extractor);
        const auto fam = family_name(family);
        const auto fu = fusion_mode_name(fusion);
        fmt::print("{:<10} {:<8} {:<7} {:>9} {:>8} {:>9} {:>9} {:>5}\n", ex, fam, fu,
                   r.accuracy_pct(), r.fpr_pct(), r.recall_pct(), r.precision_pct(), r.f1_text());
        csv += fmt::format("{},{},{},{},{},{},{},{}\n", ex, fam, fu, pct(r.accuracy), pct(r.fpr),
                           pct(r.recall), pct(r.precision), r.f1.defined() ? r.f1_text() : "nan");
        note("{}/{}/{}: {:.2f} s", ex, fam, fu, clock.seconds());
      }
    }
  }
  if (!a.csv.empty()) write_text(a.csv, csv);
  return 0;
}

int cmd_eval(const Globals& g, const EvalArgs& a) {
  if (a.all_combinations) return combination_table(g, a);
  if (a.model.empty() || a.test.empty()) throw DomainError("eval needs --model and --test");
  const auto user = layered_config(g);
  const auto fitted = FittedPipeline::from_json(read_json(a.model));
  check_model_config(fitted, g, user);
  const auto test = load_dataset(a.test);
  const auto result = evaluate(fitted, test);
  fmt::print("{}", report_text(result.report));
  if (result.image_report && result.timing_report) {
    fmt::print("image channel:  accuracy {} fpr {}\n", result.image_report->accuracy_pct(),
               result.image_report->fpr_pct());
    fmt::print("timing channel: accuracy {} fpr {}\n", result.timing_report->accuracy_pct(),
               result.timing_report->fpr_pct());
  }
  if (!a.csv.empty()) write_text(a.csv, report_csv(result.report));
  return 0;
}

// ---------------------------------------------------------------------------

struct DetectArgs {
  std::string model, dataset, pair_id;
  std::string image1, image2, t1, t2;
};

int cmd_detect(const Globals& g, const DetectArgs& a) {
  const auto fitted = FittedPipeline::from_json(read_json(a.model));
  check_model_config(fitted, g, layered_config(g));

  PressPair pair;
  if (!a.dataset.empty()) {
    if (a.pair_id.empty()) throw DomainError("--dataset needs --pair");
    const auto ds = load_dataset(a.dataset);
    const auto it = std::find_if(ds.pairs.begin(), ds.pairs.end(),
                                 [&](const PressPair& p) { return p.pair_id == a.pair_id; });
    if (it == ds.pairs.end()) throw LookupError(fmt::format("no pair '{}' in {}", a.pair_id, a.dataset));
    pair = *it;
  } else {
    if (a.image1.empty() || a.image2.empty() || a.t1.empty() || a.t2.empty()) {
      throw DomainError("detect needs --dataset/--pair or --image1 --image2 --t1 --t2");
    }
    pair.pair_id = "input";
    pair.first_id = fs::path(a.image1).stem().string();
    pair.second_id = fs::path(a.image2).stem().string();
    pair.first = read_pgm(a.image1);
    pair.second = read_pgm(a.image2);
    pair.t1 = parse_timestamp(a.t1);
    pair.t2 = parse_timestamp(a.t2);
  }
  press_interval(pair);  // ordering check before any feature work

  const auto v = fitted.detect(pair);
  const bool normal = v.final.prediction == Prediction::Normal;
  fmt::print("{} {} score={:.6g} margin={:.6g}\n", pair.pair_id, normal ? "Normal" : "Anomalous",
             v.final.score, v.final.margin);
  if (v.image && v.timing) {
    fmt::print("  image {} margin={:.6g}; timing {} margin={:.6g}\n",
               v.image->prediction == Prediction::Normal ? "Normal" : "Anomalous", v.image->margin,
               v.timing->prediction == Prediction::Normal ? "Normal" : "Anomalous", v.timing->margin);
  }
  return normal ? 0 : kExitAnomalous;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string train, test, csv;
  std::vector<double> fractions{0.2, 0.4, 0.6, 0.8, 1.0};
  bool by_subject = false;
};

int cmd_sweep(const Globals& g, const SweepArgs& a) {
  const auto cfg = pipeline_config(g, layered_config(g));
  const auto train = load_dataset(a.train);
  const auto test = load_dataset(a.test);
  Stopwatch clock;
  const auto rows = sweep(train, test, a.fractions, cfg, g.seed.value_or(cfg.seed), a.by_subject);
  const auto csv = sweep_csv(rows);
  fmt::print("{}", csv);
  for (const auto& row : rows) note("fraction {}: {} training pairs", row.fraction, row.train_ids.size());
  note("sweep: {:.2f} s", clock.seconds());
  if (!a.csv.empty()) write_text(a.csv, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-factor press-pair anomaly detection against puppet attacks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_file, "key = value settings file")->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "Override one setting, key=value (repeatable)");
  app.add_option("--seed", g.seed, "Seed for generation, training and splits");
  app.add_flag("-v,--verbose", g.verbose, "Progress and timings on stderr");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic press-pair dataset");
  gen_cmd->add_option("--normal", gen.normal, "Legitimate pairs");
  gen_cmd->add_option("--attack", gen.attack, "Attack pairs");
  gen_cmd->add_option("--subjects", gen.subjects, "Number of subjects (default 10)");
  gen_cmd->add_option("--population-seed", gen.population_seed,
                      "Seed of the subject population; share it between train and test sets");
  gen_cmd->add_option("--embeddings", gen.embedding_grid,
                      "Also write <out>/embeddings.txt with grid x grid pooled stand-in embeddings")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fit the pipeline on legitimate pairs");
  train_cmd->add_option("--train", train.train, "Training dataset directory")->required();
  train_cmd->add_option("--model", train.model, "Model bundle to write")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a labeled test set");
  eval_cmd->add_option("--model", eval.model, "Model bundle");
  eval_cmd->add_option("--test", eval.test, "Labeled test dataset directory");
  eval_cmd->add_option("--train", eval.train, "Training set (with --paper-table)");
  eval_cmd->add_flag("--paper-table", eval.all_combinations,
                     "Train and score all 18 feature x classifier x fusion combinations");
  eval_cmd->add_option("--csv", eval.csv, "Also write results as CSV");

  DetectArgs detect;
  auto* detect_cmd = app.add_subcommand("detect", "Classify one press pair; exit 0 Normal, 1 Anomalous");
  detect_cmd->add_option("--model", detect.model, "Model bundle")->required();
  detect_cmd->add_option("--dataset", detect.dataset, "Dataset directory holding the pair");
  detect_cmd->add_option("--pair", detect.pair_id, "Pair id in the dataset manifest");
  detect_cmd->add_option("--image1", detect.image1, "First press (PGM)");
  detect_cmd->add_option("--image2", detect.image2, "Second press (PGM)");
  detect_cmd->add_option("--t1", detect.t1, "First capture time, yyyymmddHHMMSS.xxxxxx");
  detect_cmd->add_option("--t2", detect.t2, "Second capture time");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy against training-set fraction");
  sweep_cmd->add_option("--train", sw.train, "Training dataset directory")->required();
  sweep_cmd->add_option("--test", sw.test, "Labeled test dataset directory")->required();
  sweep_cmd->add_option("--fractions", sw.fractions, "Ascending fractions in (0, 1]")->delimiter(',');
  sweep_cmd->add_flag("--by-subject", sw.by_subject, "Subsample whole subjects");
  sweep_cmd->add_option("--csv", sw.csv, "Also write the CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  g_verbose = g.verbose;

  try {
    if (*gen_cmd) return cmd_gen(g, gen);
    if (*train_cmd) return cmd_train(g, train);
    if (*eval_cmd) return cmd_eval(g, eval);
    if (*detect_cmd) return cmd_detect(g, detect);
    if (*sweep_cmd) return cmd_sweep(g, sw);
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage + 1;
  }
  return kExitUsage;
}
