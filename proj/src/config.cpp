#include "pupguard/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pupguard/error.hpp"

namespace pupguard {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ParseError(fmt::format("config: key '{}' has invalid value '{}' (expected {})", key, value,
                               expected));
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& value) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "an integer");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "true/false");
}

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap map;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ParseError(fmt::format("config line {}: expected 'key = value'", line_no));
    }
    std::string key = trim(std::string_view(stripped).substr(0, eq));
    std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw ParseError(fmt::format("config line {}: empty key", line_no));
    map[key] = value;
  }
  return map;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config_text(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void apply_pipeline_config(PipelineConfig& cfg, const ConfigMap& map) {
  for (const auto& [key, value] : map) {
    if (key.starts_with("gen.") || key.starts_with("attack.")) continue;
    try {
      if (key == "extractor") {
        cfg.extractor = extractor_from_name(value);
      } else if (key == "embedding_file") {
        cfg.embedding_file = value;
      } else if (key == "lbp_grid") {
        cfg.lbp_grid = to_int<int>(key, value);
      } else if (key == "hog.cell") {
        cfg.hog.cell = to_int<int>(key, value);
      } else if (key == "hog.block") {
        cfg.hog.block = to_int<int>(key, value);
      } else if (key == "hog.stride") {
        cfg.hog.stride = to_int<int>(key, value);
      } else if (key == "hog.bins") {
        cfg.hog.bins = to_int<int>(key, value);
      } else if (key == "otsu") {
        cfg.otsu = to_bool(key, value);
      } else if (key == "polarity") {
        if (value == "dark") {
          cfg.polarity = Polarity::DarkForeground;
        } else if (value == "light") {
          cfg.polarity = Polarity::LightForeground;
        } else {
          bad_value(key, value, "dark/light");
        }
      } else if (key == "binarize") {
        cfg.binarize = to_bool(key, value);
      } else if (key == "pca_k") {
        cfg.pca_k = value == "auto" ? -1 : value == "none" ? 0 : to_int<int>(key, value);
      } else if (key == "fusion") {
        cfg.fusion = fusion_mode_from_name(value);
      } else if (key == "cross_offset") {
        cfg.cross_offset = to_double(key, value);
      } else if (key == "cross_timing") {
        if (value == "standardized") {
          cfg.cross_raw_timing = false;
        } else if (value == "raw") {
          cfg.cross_raw_timing = true;
        } else {
          bad_value(key, value, "standardized/raw");
        }
      } else if (key == "standardize_fused") {
        cfg.standardize_fused = to_bool(key, value);
      } else if (key == "classifier") {
        cfg.classifier.family = family_from_name(value);
      } else if (key == "timing_classifier") {
        cfg.timing_classifier.family = family_from_name(value);
      } else if (key == "decision_fusion") {
        cfg.decision_fusion = to_bool(key, value);
      } else if (key == "ocsvm.nu") {
        cfg.classifier.ocsvm.nu = to_double(key, value);
      } else if (key == "ocsvm.gamma") {
        cfg.classifier.ocsvm.gamma =
            value == "auto" ? std::nullopt : std::optional<double>(to_double(key, value));
      } else if (key == "ocsvm.tol") {
        cfg.classifier.ocsvm.tol = to_double(key, value);
      } else if (key == "ocsvm.max_iter") {
        cfg.classifier.ocsvm.max_iter = to_int<std::int64_t>(key, value);
      } else if (key == "iforest.trees") {
        cfg.classifier.iforest.trees = to_int<int>(key, value);
      } else if (key == "iforest.psi") {
        cfg.classifier.iforest.psi = to_int<int>(key, value);
      } else if (key == "iforest.threshold") {
        cfg.classifier.iforest.threshold = to_double(key, value);
      } else if (key == "lof.k") {
        cfg.classifier.lof.k = to_int<int>(key, value);
      } else if (key == "lof.threshold") {
        cfg.classifier.lof.threshold = to_double(key, value);
      } else if (key == "seed") {
        cfg.seed = to_int<std::uint64_t>(key, value);
      } else {
        throw ParseError(fmt::format("config: unknown key '{}'", key));
      }
    } catch (const ParseError& e) {
      const std::string what = e.what();
      if (what.starts_with("config:")) throw;
      throw ParseError(fmt::format("config: key '{}': {}", key, what));
    }
  }
  // The timing classifier shares every hyperparameter except the family.
  const Family timing_family = cfg.timing_classifier.family;
  cfg.timing_classifier = cfg.classifier;
  cfg.timing_classifier.family = timing_family;
}

void apply_attack_config(AttackParams& attack, const ConfigMap& map) {
  for (const auto& [key, value] : map) {
    if (!key.starts_with("attack.")) continue;
    if (key == "attack.interval_shift_sigmas") {
      attack.interval_shift_sigmas = to_double(key, value);
    } else if (key == "attack.pressure_gain") {
      attack.pressure_gain = to_double(key, value);
    } else if (key == "attack.center_offset_px") {
      attack.center_offset_px = to_double(key, value);
    } else if (key == "attack.rotation_deg") {
      attack.rotation_deg = to_double(key, value);
    } else if (key == "attack.smear_length_px") {
      attack.smear_length_px = to_int<int>(key, value);
    } else if (key == "attack.channel_mix") {
      attack.channel_mix = to_double(key, value);
    } else {
      throw ParseError(fmt::format("config: unknown key '{}'", key));
    }
  }
}

ConfigMap pipeline_config_to_map(const PipelineConfig& cfg) {
  ConfigMap m;
  m["extractor"] = std::string(extractor_name(cfg.extractor));
  m["embedding_file"] = cfg.embedding_file;
  m["lbp_grid"] = std::to_string(cfg.lbp_grid);
  m["hog.cell"] = std::to_string(cfg.hog.cell);
  m["hog.block"] = std::to_string(cfg.hog.block);
  m["hog.stride"] = std::to_string(cfg.hog.stride);
  m["hog.bins"] = std::to_string(cfg.hog.bins);
  m["otsu"] = cfg.otsu ? "true" : "false";
  m["polarity"] = cfg.polarity == Polarity::DarkForeground ? "dark" : "light";
  m["binarize"] = cfg.binarize ? "true" : "false";
  m["pca_k"] = cfg.pca_k < 0 ? "auto" : std::to_string(cfg.pca_k);
  m["fusion"] = std::string(fusion_mode_name(cfg.fusion));
  m["cross_offset"] = num(cfg.cross_offset);
  m["cross_timing"] = cfg.cross_raw_timing ? "raw" : "standardized";
  m["standardize_fused"] = cfg.standardize_fused ? "true" : "false";
  m["classifier"] = std::string(family_name(cfg.classifier.family));
  m["timing_classifier"] = std::string(family_name(cfg.timing_classifier.family));
  m["decision_fusion"] = cfg.decision_fusion ? "true" : "false";
  m["ocsvm.nu"] = num(cfg.classifier.ocsvm.nu);
  m["ocsvm.gamma"] = cfg.classifier.ocsvm.gamma ? num(*cfg.classifier.ocsvm.gamma) : "auto";
  m["ocsvm.tol"] = num(cfg.classifier.ocsvm.tol);
  m["ocsvm.max_iter"] = std::to_string(cfg.classifier.ocsvm.max_iter);
  m["iforest.trees"] = std::to_string(cfg.classifier.iforest.trees);
  m["iforest.psi"] = std::to_string(cfg.classifier.iforest.psi);
  m["iforest.threshold"] = num(cfg.classifier.iforest.threshold);
  m["lof.k"] = std::to_string(cfg.classifier.lof.k);
  m["lof.threshold"] = num(cfg.classifier.lof.threshold);
  m["seed"] = std::to_string(cfg.seed);
  return m;
}

std::string format_config(const ConfigMap& map) {
  std::string out;
  for (const auto& [key, value] : map) out += fmt::format("{} = {}\n", key, value);
  return out;
}

}  // namespace pupguard
