#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "pupguard/pipeline.hpp"
#include "pupguard/synthgen.hpp"

namespace pupguard {

// Flat `key = value` settings. `#` starts a comment; blank lines are ignored.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(std::string_view text);
ConfigMap read_config_file(const std::filesystem::path& path);

// Applies pipeline keys. Keys under `gen.` and `attack.` belong to the
// generator and are skipped; any other unknown key is a ParseError.
void apply_pipeline_config(PipelineConfig& cfg, const ConfigMap& map);
void apply_attack_config(AttackParams& attack, const ConfigMap& map);

// Every serializable pipeline key with its current value.
ConfigMap pipeline_config_to_map(const PipelineConfig& cfg);

std::string format_config(const ConfigMap& map);

}  // namespace pupguard
