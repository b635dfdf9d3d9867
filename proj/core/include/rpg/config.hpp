#pragma once
// Flat key-value configuration with dotted sections ("train.lr_base = 0.01").
// CLI flags override file values; the canonical serialization (sorted keys)
// backs a config hash that is stable under field reordering.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rpg/training.hpp"

namespace rpg {

struct KeyValueConfig {
  std::map<std::string, std::string> values;

  static KeyValueConfig parse_text(const std::string& text);  // line diagnostics on errors
  static KeyValueConfig parse_file(const std::string& path);

  bool has(const std::string& key) const { return values.count(key) != 0; }
  void set(const std::string& key, std::string value) { values[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::string serialize() const;  // canonical: sorted keys
  uint64_t hash() const;          // FNV-1a over the canonical serialization
};

struct ExperimentConfig {
  AlgorithmSpec algo;
  std::string game_name = "fig2_coop";  // built-in name
  std::string game_file;                // overrides game_name when set
  TrainOptions opts;
  std::vector<uint64_t> seeds{0};
  std::string out_dir = "runs";
  std::string run_name;  // derived from algo/game when empty

  // Throws std::invalid_argument naming the offending key; checks that
  // referenced files exist. Unknown keys are rejected.
  static ExperimentConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
  uint64_t hash() const { return to_kv().hash(); }

  PayoffGame resolve_game() const;
  std::string resolved_out_dir() const;  // honors the RPG_OUTPUT_ROOT env var
  std::string resolved_run_name() const;
};

const char* run_mode_name(RunMode mode);
const char* dice_mode_name(DiceMode mode);
const char* optimizer_name(OptimizerKind kind);
const char* advantage_norm_name(AdvantageNorm norm);

}  // namespace rpg
