#include "rpg/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rpg {

namespace {
std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}
}  // namespace

KeyValueConfig KeyValueConfig::parse_text(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    kv.values[key] = value;
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_text(ss.str());
  } catch (const std::invalid_argument& err) {
    throw std::invalid_argument(path + ": " + err.what());
  }
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config field '" + key + "': expected a number, got '" +
                                it->second + "'");
  }
}

int64_t KeyValueConfig::get_int(const std::string& key, int64_t fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    size_t pos = 0;
    const int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config field '" + key + "': expected an integer, got '" +
                                it->second + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::invalid_argument("config field '" + key + "': expected a boolean, got '" +
                              it->second + "'");
}

std::string KeyValueConfig::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : values) out << k << " = " << v << "\n";
  return out.str();
}

uint64_t KeyValueConfig::hash() const {
  const std::string canon = serialize();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : canon) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

const char* run_mode_name(RunMode mode) { return mode == RunMode::sampled ? "sampled" : "exact"; }
const char* dice_mode_name(DiceMode mode) { return mode == DiceMode::loaded ? "loaded" : "raw"; }
const char* optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}
const char* advantage_norm_name(AdvantageNorm norm) {
  return norm == AdvantageNorm::pooled_per_agent ? "pooled" : "per-partner";
}

namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "algo.kind",       "algo.population",    "algo.lambda",
      "algo.victim",     "algo.sequential",    "game.name",
      "game.file",       "train.mode",         "train.steps",
      "train.batch",     "train.lookahead",    "train.lr_base",
      "train.lr_base_lookahead",               "train.lr_manipulator",
      "train.max_grad_norm_manipulator",       "train.partnerplay",
      "train.dice_lambda",                     "train.dice_mode",
      "train.gamma",     "train.gae_lambda",   "train.entropy_coef",
      "train.value_coef",                      "train.critic_lr",
      "train.optimizer", "train.init_scale",   "train.advantage_norm",
      "train.convergence_window",              "train.convergence_tv",
      "run.seeds",       "run.out_dir",        "run.checkpoint_interval",
      "run.name",
  };
  return keys;
}

std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(std::stoull(item));
  }
  if (out.empty()) throw std::invalid_argument("config field 'run.seeds': seed list is empty");
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv) {
  for (const auto& [key, value] : kv.values) {
    bool known = false;
    for (const std::string& k : known_keys()) known = known || k == key;
    if (!known) throw std::invalid_argument("unknown config field '" + key + "'");
  }

  ExperimentConfig cfg;
  cfg.algo.kind = algorithm_from_name(kv.get_string("algo.kind", "at-rpg"));
  cfg.algo.population = static_cast<int>(kv.get_int("algo.population", 2));
  cfg.algo.lambda_diversity = kv.get_double("algo.lambda", 0.25);
  cfg.algo.victim_checkpoint = kv.get_string("algo.victim", "");
  cfg.algo.sequential_ad = kv.get_bool("algo.sequential", false);
  cfg.game_name = kv.get_string("game.name", "fig2_coop");
  cfg.game_file = kv.get_string("game.file", "");

  const std::string mode = kv.get_string("train.mode", "sampled");
  if (mode == "sampled")
    cfg.opts.mode = RunMode::sampled;
  else if (mode == "exact")
    cfg.opts.mode = RunMode::exact;
  else
    throw std::invalid_argument("config field 'train.mode': expected sampled|exact, got '" +
                                mode + "'");

  TrainConfig& t = cfg.opts.train;
  cfg.opts.steps = kv.get_int("train.steps", 3000);
  t.batch_size = static_cast<int>(kv.get_int("train.batch", 128));
  t.lookahead.lookahead_n = static_cast<int>(kv.get_int("train.lookahead", 4));
  t.lookahead.lr_base = kv.get_double("train.lr_base", 0.01);
  t.lookahead.lr_base_lookahead = kv.get_double("train.lr_base_lookahead", 0.1);
  t.lookahead.lr_manipulator = kv.get_double("train.lr_manipulator", 0.01);
  t.lookahead.max_grad_norm_manipulator =
      kv.get_double("train.max_grad_norm_manipulator", 0.5);
  t.lookahead.partnerplay_eps = kv.get_double("train.partnerplay", 0.0);
  t.lookahead.dice_lambda = kv.get_double("train.dice_lambda", 0.95);
  t.gamma = kv.get_double("train.gamma", 0.95);
  t.gae_lambda = kv.get_double("train.gae_lambda", 0.95);
  t.entropy_coef = kv.get_double("train.entropy_coef", 0.0);
  t.value_coef = kv.get_double("train.value_coef", 0.5);
  t.critic_lr = kv.get_double("train.critic_lr", 1.0);

  const std::string dice = kv.get_string("train.dice_mode", "loaded");
  if (dice == "loaded")
    t.dice_mode = DiceMode::loaded;
  else if (dice == "raw")
    t.dice_mode = DiceMode::raw;
  else
    throw std::invalid_argument("config field 'train.dice_mode': expected loaded|raw, got '" +
                                dice + "'");

  const std::string opt = kv.get_string("train.optimizer", "sgd");
  if (opt == "sgd")
    t.optimizer = OptimizerKind::sgd;
  else if (opt == "adam")
    t.optimizer = OptimizerKind::adam;
  else
    throw std::invalid_argument("config field 'train.optimizer': expected sgd|adam, got '" +
                                opt + "'");

  const std::string norm = kv.get_string("train.advantage_norm", "pooled");
  if (norm == "pooled")
    t.advantage_norm = AdvantageNorm::pooled_per_agent;
  else if (norm == "per-partner")
    t.advantage_norm = AdvantageNorm::per_partner;
  else
    throw std::invalid_argument(
        "config field 'train.advantage_norm': expected pooled|per-partner, got '" + norm + "'");

  cfg.opts.init_scale = kv.get_double("train.init_scale", 0.5);
  cfg.opts.convergence_window = static_cast<int>(kv.get_int("train.convergence_window", 200));
  cfg.opts.convergence_tv = kv.get_double("train.convergence_tv", 0.01);
  cfg.opts.checkpoint_interval = kv.get_int("run.checkpoint_interval", 0);
  if (kv.has("run.seeds")) cfg.seeds = parse_seed_list(kv.get_string("run.seeds", "0"));
  cfg.out_dir = kv.get_string("run.out_dir", "runs");
  cfg.run_name = kv.get_string("run.name", "");

  if (!cfg.game_file.empty() && !std::filesystem::exists(cfg.game_file))
    throw std::invalid_argument("config field 'game.file': no such file '" + cfg.game_file + "'");
  if (cfg.game_file.empty() && find_builtin(cfg.game_name) == nullptr)
    throw std::invalid_argument("config field 'game.name': unknown built-in game '" +
                                cfg.game_name + "'");
  if (!cfg.algo.victim_checkpoint.empty() &&
      !std::filesystem::exists(cfg.algo.victim_checkpoint))
    throw std::invalid_argument("config field 'algo.victim': no such file '" +
                                cfg.algo.victim_checkpoint + "'");
  cfg.algo.validate();
  cfg.opts.train.lookahead.validate();
  return cfg;
}

KeyValueConfig ExperimentConfig::to_kv() const {
  KeyValueConfig kv;
  std::ostringstream seeds;
  for (size_t k = 0; k < this->seeds.size(); ++k) {
    if (k) seeds << ",";
    seeds << this->seeds[k];
  }
  const TrainConfig& t = opts.train;
  kv.set("algo.kind", algorithm_name(algo.kind));
  kv.set("algo.population", std::to_string(algo.population));
  kv.set("algo.lambda", std::to_string(algo.lambda_diversity));
  if (!algo.victim_checkpoint.empty()) kv.set("algo.victim", algo.victim_checkpoint);
  kv.set("algo.sequential", algo.sequential_ad ? "true" : "false");
  kv.set("game.name", game_name);
  if (!game_file.empty()) kv.set("game.file", game_file);
  kv.set("train.mode", run_mode_name(opts.mode));
  kv.set("train.steps", std::to_string(opts.steps));
  kv.set("train.batch", std::to_string(t.batch_size));
  kv.set("train.lookahead", std::to_string(t.lookahead.lookahead_n));
  kv.set("train.lr_base", std::to_string(t.lookahead.lr_base));
  kv.set("train.lr_base_lookahead", std::to_string(t.lookahead.lr_base_lookahead));
  kv.set("train.lr_manipulator", std::to_string(t.lookahead.lr_manipulator));
  kv.set("train.max_grad_norm_manipulator",
         std::to_string(t.lookahead.max_grad_norm_manipulator));
  kv.set("train.partnerplay", std::to_string(t.lookahead.partnerplay_eps));
  kv.set("train.dice_lambda", std::to_string(t.lookahead.dice_lambda));
  kv.set("train.dice_mode", dice_mode_name(t.dice_mode));
  kv.set("train.gamma", std::to_string(t.gamma));
  kv.set("train.gae_lambda", std::to_string(t.gae_lambda));
  kv.set("train.entropy_coef", std::to_string(t.entropy_coef));
  kv.set("train.value_coef", std::to_string(t.value_coef));
  kv.set("train.critic_lr", std::to_string(t.critic_lr));
  kv.set("train.optimizer", optimizer_name(t.optimizer));
  kv.set("train.advantage_norm", advantage_norm_name(t.advantage_norm));
  kv.set("train.init_scale", std::to_string(opts.init_scale));
  kv.set("train.convergence_window", std::to_string(opts.convergence_window));
  kv.set("train.convergence_tv", std::to_string(opts.convergence_tv));
  kv.set("run.seeds", seeds.str());
  kv.set("run.out_dir", out_dir);
  kv.set("run.checkpoint_interval", std::to_string(opts.checkpoint_interval));
  if (!run_name.empty()) kv.set("run.name", run_name);
  return kv;
}

PayoffGame ExperimentConfig::resolve_game() const {
  if (!game_file.empty()) return load_game_file(game_file);
  const PayoffGame* g = find_builtin(game_name);
  if (g == nullptr) throw std::invalid_argument("unknown built-in game '" + game_name + "'");
  return *g;
}

std::string ExperimentConfig::resolved_out_dir() const {
  std::filesystem::path dir(out_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv("RPG_OUTPUT_ROOT"); root != nullptr && *root != '\0')
      dir = std::filesystem::path(root) / dir;
  }
  return dir.string();
}

std::string ExperimentConfig::resolved_run_name() const {
  if (!run_name.empty()) return run_name;
  const std::string game = game_file.empty() ? game_name : "customgame";
  return algorithm_name(algo.kind) + "-" + game;
}

}  // namespace rpg
