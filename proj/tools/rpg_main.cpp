// Command-line front end: run, crossplay, sweep, check, audit.

#include <iostream>
#include <string>
#include <vector>

#include "rpg/runner.hpp"

namespace {

using namespace rpg;

void print_usage(std::ostream& out) {
  out << "usage: rpg <command> [options]\n"
      << "\n"
      << "commands:\n"
      << "  run        train one configuration across its seeds\n"
      << "  crossplay  evaluate a cross-play grid over checkpoints\n"
      << "  sweep      cartesian sweep over config overrides\n"
      << "  check      self-test suites (grad | oracle | dice | all)\n"
      << "  audit      rationality audit of checkpointed strategies\n"
      << "\n"
      << "run/sweep options:\n"
      << "  --config FILE          key-value config file\n"
      << "  --game NAME            built-in game (game.name)\n"
      << "  --game-file FILE       game definition file (game.file)\n"
      << "  --algo NAME            sp|ap|at|paired|ad|ap-rpg|at-rpg|paired-rpg|\n"
      << "                         paired-a-rpg|ad-rpg (algo.kind)\n"
      << "  --steps N              training steps (train.steps)\n"
      << "  --lookahead N          lookahead depth (train.lookahead)\n"
      << "  --batch N              rollout batch size (train.batch)\n"
      << "  --mode sampled|exact   estimator path (train.mode)\n"
      << "  --population M         diversity population size (algo.population)\n"
      << "  --victim FILE          frozen victim checkpoint (algo.victim)\n"
      << "  --seed S | --seeds L   seed or comma list (run.seeds)\n"
      << "  --out DIR              output root (run.out_dir)\n"
      << "  --name NAME            run directory name (run.name)\n"
      << "  --set key=value        any config field\n"
      << "  --grid key=v1,v2,...   sweep axis (sweep only, repeatable)\n"
      << "  --jobs N               sweep worker threads (default 1)\n"
      << "\n"
      << "crossplay options: --game/--game-file, --episodes N (0 = exact),\n"
      << "  --seed S, --out FILE, then checkpoint paths or globs\n"
      << "audit options: --game/--game-file, --delta D, --support-tol T,\n"
      << "  then checkpoint paths or globs\n"
      << "check options: --suite grad|oracle|dice|all, --h H, --seed S\n";
}

struct Args {
  std::vector<std::string> positional;
  std::vector<std::pair<std::string, std::string>> flags;  // in order, repeats kept

  bool has(const std::string& name) const {
    for (const auto& [k, v] : flags)
      if (k == name) return true;
    return false;
  }
  std::string get(const std::string& name, const std::string& fallback = "") const {
    for (const auto& [k, v] : flags)
      if (k == name) return v;
    return fallback;
  }
  std::vector<std::string> all(const std::string& name) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : flags)
      if (k == name) out.push_back(v);
    return out;
  }
};

const std::vector<std::string> kValueFlags{
    "--config", "--game", "--game-file",  "--algo",   "--steps", "--lookahead",
    "--batch",  "--mode", "--population", "--victim", "--seed",  "--seeds",
    "--out",    "--name", "--set",        "--grid",   "--jobs",  "--episodes",
    "--suite",  "--h",    "--delta",      "--support-tol", "--sequential"};

Args parse_args(int argc, char** argv, int from) {
  Args args;
  for (int k = from; k < argc; ++k) {
    const std::string arg = argv[k];
    if (arg.rfind("--", 0) == 0) {
      bool known = false;
      for (const std::string& f : kValueFlags) known = known || f == arg;
      if (!known) throw std::invalid_argument("unknown flag '" + arg + "'");
      if (k + 1 >= argc) throw std::invalid_argument("flag '" + arg + "' needs a value");
      args.flags.emplace_back(arg, argv[++k]);
    } else {
      args.positional.push_back(arg);
    }
  }
  return args;
}

KeyValueConfig kv_from_args(const Args& args) {
  KeyValueConfig kv;
  if (args.has("--config")) kv = KeyValueConfig::parse_file(args.get("--config"));
  auto map_flag = [&](const char* flag, const char* key) {
    if (args.has(flag)) kv.set(key, args.get(flag));
  };
  map_flag("--game", "game.name");
  map_flag("--game-file", "game.file");
  map_flag("--algo", "algo.kind");
  map_flag("--steps", "train.steps");
  map_flag("--lookahead", "train.lookahead");
  map_flag("--batch", "train.batch");
  map_flag("--mode", "train.mode");
  map_flag("--population", "algo.population");
  map_flag("--victim", "algo.victim");
  map_flag("--sequential", "algo.sequential");
  map_flag("--seed", "run.seeds");
  map_flag("--seeds", "run.seeds");
  map_flag("--out", "run.out_dir");
  map_flag("--name", "run.name");
  for (const std::string& setting : args.all("--set")) {
    const size_t eq = setting.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + setting + "'");
    kv.set(setting.substr(0, eq), setting.substr(eq + 1));
  }
  return kv;
}

PayoffGame game_from_args(const Args& args) {
  if (args.has("--game-file")) return load_game_file(args.get("--game-file"));
  const std::string name = args.get("--game", "fig2_coop");
  const PayoffGame* g = find_builtin(name);
  if (g == nullptr) throw std::invalid_argument("unknown built-in game '" + name + "'");
  return *g;
}

int cmd_run(const Args& args) {
  const ExperimentConfig cfg = ExperimentConfig::from_kv(kv_from_args(args));
  return cli_run(cfg, std::cout);
}

int cmd_sweep(const Args& args) {
  const ExperimentConfig cfg = ExperimentConfig::from_kv(kv_from_args(args));
  std::vector<SweepAxis> grid;
  for (const std::string& axis : args.all("--grid")) {
    const size_t eq = axis.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--grid expects key=v1,v2,..., got '" + axis + "'");
    SweepAxis sa;
    sa.key = axis.substr(0, eq);
    std::string values = axis.substr(eq + 1);
    size_t pos = 0;
    while (pos != std::string::npos) {
      const size_t comma = values.find(',', pos);
      sa.values.push_back(values.substr(pos, comma - pos));
      pos = comma == std::string::npos ? comma : comma + 1;
    }
    grid.push_back(std::move(sa));
  }
  const int jobs = std::stoi(args.get("--jobs", "1"));
  return cli_sweep(cfg, grid, jobs, std::cout);
}

int cmd_crossplay(const Args& args) {
  if (args.positional.empty())
    throw std::invalid_argument("crossplay needs at least one checkpoint path");
  const PayoffGame game = game_from_args(args);
  const int episodes = std::stoi(args.get("--episodes", "0"));
  const uint64_t seed = std::stoull(args.get("--seed", "0"));
  return cli_crossplay(args.positional, game, episodes, seed, args.get("--out", ""), std::cout);
}

int cmd_check(const Args& args) {
  const std::string suite = args.get("--suite", "all");
  const double h = std::stod(args.get("--h", "1e-5"));
  const uint64_t seed = std::stoull(args.get("--seed", "0"));
  return cli_check(suite, h, seed, std::cout);
}

int cmd_audit(const Args& args) {
  if (args.positional.empty())
    throw std::invalid_argument("audit needs at least one checkpoint path");
  const PayoffGame game = game_from_args(args);
  const double delta = std::stod(args.get("--delta", "0.01"));
  const double support_tol = std::stod(args.get("--support-tol", "0.05"));
  return cli_audit(args.positional, game, delta, support_tol, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    print_usage(std::cerr);
    return rpg::kExitUsage;
  }
  const std::string command = argv[1];
  if (command == "--help" || command == "-h" || command == "help") {
    print_usage(std::cout);
    return rpg::kExitOk;
  }
  try {
    const Args args = parse_args(argc, argv, 2);
    if (command == "run") return cmd_run(args);
    if (command == "crossplay") return cmd_crossplay(args);
    if (command == "sweep") return cmd_sweep(args);
    if (command == "check") return cmd_check(args);
    if (command == "audit") return cmd_audit(args);
    std::cerr << "unknown command '" << command << "'\n";
    print_usage(std::cerr);
    return rpg::kExitUsage;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return rpg::kExitUsage;
  } catch (const rpg::NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return rpg::kExitNumerical;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return rpg::kExitNumerical;
  }
}
