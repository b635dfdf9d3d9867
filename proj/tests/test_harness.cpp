#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "rpg/runner.hpp"

using namespace rpg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / tag) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig quick_config(const std::string& out_dir) {
  KeyValueConfig kv;
  kv.set("algo.kind", "at");
  kv.set("game.name", "fig2_coop");
  kv.set("train.mode", "sampled");
  kv.set("train.steps", "20");
  kv.set("train.batch", "16");
  kv.set("run.seeds", "7");
  kv.set("run.out_dir", out_dir);
  kv.set("run.name", "t");
  return ExperimentConfig::from_kv(kv);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config parsing, overrides and diagnostics") {
  KeyValueConfig kv = KeyValueConfig::parse_text(
      "# comment\n"
      "algo.kind = at-rpg\n"
      "train.steps = 123\n"
      "train.lr_base = 0.02  # trailing comment\n");
  CHECK(kv.get_string("algo.kind", "") == "at-rpg");
  CHECK(kv.get_int("train.steps", 0) == 123);
  CHECK(kv.get_double("train.lr_base", 0) == doctest::Approx(0.02));
  kv.set("train.steps", "7");  // override wins
  CHECK(kv.get_int("train.steps", 0) == 7);

  CHECK_THROWS_WITH_AS((void)KeyValueConfig::parse_text("line without equals\n"),
                       doctest::Contains("line 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS((void)kv.get_int("algo.kind", 0), doctest::Contains("algo.kind"),
                       std::invalid_argument);
}

TEST_CASE("experiment config validates fields") {
  KeyValueConfig kv;
  kv.set("bogus.key", "1");
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::from_kv(kv), doctest::Contains("bogus.key"),
                       std::invalid_argument);

  KeyValueConfig bad_game;
  bad_game.set("game.name", "not_a_game");
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::from_kv(bad_game),
                       doctest::Contains("not_a_game"), std::invalid_argument);

  KeyValueConfig bad_file;
  bad_file.set("game.file", "/definitely/missing.game");
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::from_kv(bad_file),
                       doctest::Contains("no such file"), std::invalid_argument);

  KeyValueConfig bad_mode;
  bad_mode.set("train.mode", "psychic");
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::from_kv(bad_mode), doctest::Contains("psychic"),
                       std::invalid_argument);
}

TEST_CASE("config hash is stable under field reordering") {
  const std::string a =
      "algo.kind = at-rpg\n"
      "train.steps = 100\n"
      "game.name = fig13_rps\n";
  const std::string b =
      "game.name = fig13_rps\n"
      "algo.kind = at-rpg\n"
      "train.steps = 100\n";
  CHECK(KeyValueConfig::parse_text(a).hash() == KeyValueConfig::parse_text(b).hash());
  const ExperimentConfig ca = ExperimentConfig::from_kv(KeyValueConfig::parse_text(a));
  const ExperimentConfig cb = ExperimentConfig::from_kv(KeyValueConfig::parse_text(b));
  CHECK(ca.hash() == cb.hash());
  // a real change moves the hash
  KeyValueConfig kv = KeyValueConfig::parse_text(a);
  kv.set("train.steps", "101");
  CHECK(ExperimentConfig::from_kv(kv).hash() != ca.hash());
}

TEST_CASE("defaults follow the matrix-game hyperparameter column") {
  const ExperimentConfig cfg = ExperimentConfig::from_kv(KeyValueConfig{});
  CHECK(cfg.opts.train.optimizer == OptimizerKind::sgd);
  CHECK(cfg.opts.train.lookahead.lr_manipulator == doctest::Approx(1e-2));
  CHECK(cfg.opts.train.lookahead.lr_base == doctest::Approx(1e-2));
  CHECK(cfg.opts.train.lookahead.lr_base_lookahead == doctest::Approx(1e-1));
  CHECK(cfg.opts.train.batch_size == 128);
  CHECK(cfg.opts.train.gamma == doctest::Approx(0.95));
  CHECK(cfg.opts.train.gae_lambda == doctest::Approx(0.95));
  CHECK(cfg.opts.train.lookahead.dice_lambda == doctest::Approx(0.95));
  CHECK(cfg.opts.train.value_coef == doctest::Approx(0.5));
  CHECK(cfg.opts.train.entropy_coef == doctest::Approx(0.0));
  CHECK(cfg.opts.train.lookahead.max_grad_norm_manipulator == doctest::Approx(0.5));
  CHECK(cfg.opts.train.lookahead.partnerplay_eps == doctest::Approx(0.0));
}

TEST_CASE("cli_run writes metrics, checkpoints and a reproducible record") {
  TempDir dir("rpg_harness_run");
  ExperimentConfig cfg = quick_config(dir.path.string());
  cfg.opts.checkpoint_interval = 10;

  std::ostringstream log;
  std::vector<RunRecord> records;
  CHECK(cli_run(cfg, log, &records) == kExitOk);
  REQUIRE(records.size() == 1);
  CHECK(records[0].outcome == "budget-exhausted");
  CHECK(records[0].steps_run == 20);

  const fs::path seed_dir = dir.path / "t" / "seed7";
  CHECK(fs::exists(seed_dir / "summary.txt"));
  CHECK(fs::exists(seed_dir / "run_config.cfg"));
  CHECK(fs::exists(seed_dir / "checkpoints" / "step_000010" / "victim.ckpt"));
  CHECK(fs::exists(seed_dir / "checkpoints" / "step_000020" / "adversary.ckpt"));

  const std::string csv = slurp((seed_dir / "metrics.csv").string());
  CHECK(csv.rfind("# schema=rpg-metrics-v1", 0) == 0);  // versioned header
  CHECK(csv.find("step,agent,edge,reward_mean,loss,grad_norm,probs") != std::string::npos);

  // identical config + seed reproduces every emitted number
  TempDir dir2("rpg_harness_run2");
  ExperimentConfig cfg2 = quick_config(dir2.path.string());
  cfg2.opts.checkpoint_interval = 10;
  std::ostringstream log2;
  CHECK(cli_run(cfg2, log2, nullptr) == kExitOk);
  CHECK(slurp((dir2.path / "t" / "seed7" / "metrics.csv").string()) == csv);
  CHECK(slurp((dir2.path / "t" / "seed7" / "checkpoints" / "step_000020" / "adversary.ckpt")
                  .string()) ==
        slurp((seed_dir / "checkpoints" / "step_000020" / "adversary.ckpt").string()));
}

TEST_CASE("cli_run with zero steps leaves the initial checkpoint only") {
  TempDir dir("rpg_harness_zero");
  ExperimentConfig cfg = quick_config(dir.path.string());
  cfg.opts.steps = 0;
  std::ostringstream log;
  std::vector<RunRecord> records;
  CHECK(cli_run(cfg, log, &records) == kExitOk);
  CHECK(records[0].outcome == "budget-exhausted");
  CHECK(records[0].steps_run == 0);
  const fs::path ckpts = dir.path / "t" / "seed7" / "checkpoints";
  size_t count = 0;
  for (const auto& entry : fs::directory_iterator(ckpts)) {
    ++count;
    CHECK(entry.path().filename().string() == "step_000000");
  }
  CHECK(count == 1);
}

TEST_CASE("sweep produces the cartesian product times seeds") {
  TempDir dir("rpg_harness_sweep");
  ExperimentConfig cfg = quick_config(dir.path.string());
  cfg.seeds = {1, 2};
  cfg.opts.steps = 5;
  std::vector<SweepAxis> grid{{"train.lookahead", {"1", "2", "4"}},
                              {"train.batch", {"8", "16"}}};
  std::ostringstream log;
  CHECK(cli_sweep(cfg, grid, /*jobs=*/3, log) == kExitOk);
  const std::string summary = slurp((dir.path / "t" / "sweep_summary.csv").string());
  CHECK(summary.rfind("# schema=rpg-sweep-v1", 0) == 0);
  // header + 3*2 combos * 2 seeds rows
  const size_t rows = std::count(summary.begin(), summary.end(), '\n');
  CHECK(rows == 2 + 12);
  CHECK(summary.find("train.lookahead,train.batch,seed,outcome") != std::string::npos);
}

TEST_CASE("empty sweep grid degrades to the base run") {
  TempDir dir("rpg_harness_sweep0");
  ExperimentConfig cfg = quick_config(dir.path.string());
  cfg.opts.steps = 5;
  std::ostringstream log;
  CHECK(cli_sweep(cfg, {}, 1, log) == kExitOk);
  const std::string summary = slurp((dir.path / "t" / "sweep_summary.csv").string());
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 2 + 1);
}

TEST_CASE("crossplay cli globs checkpoints and writes the grid") {
  TempDir dir("rpg_harness_xp");
  for (int k = 0; k < 2; ++k) {
    PolicyCheckpoint c;
    c.agent_id = "m" + std::to_string(k);
    c.seats.push_back({Seat::row, {k == 0 ? 20.0 : -20.0, k == 0 ? -20.0 : 20.0}});
    c.seats.push_back({Seat::col, {20.0, -20.0, -20.0}});
    save_checkpoint((dir.path / ("m" + std::to_string(k) + ".ckpt")).string(), c);
  }
  std::ostringstream log;
  const std::string out_csv = (dir.path / "grid.csv").string();
  CHECK(cli_crossplay({(dir.path / "m*.ckpt").string()}, *find_builtin("fig2_coop"), 0, 1,
                      out_csv, log) == kExitOk);
  const std::string grid = slurp(out_csv);
  CHECK(grid.rfind("# schema=rpg-grid-v1", 0) == 0);
  CHECK(grid.find("label,m0,m1") != std::string::npos);

  CHECK_THROWS_WITH_AS((void)expand_glob((dir.path / "zz*.ckpt").string()),
                       doctest::Contains("matched no files"), std::invalid_argument);
  CHECK_THROWS_WITH_AS((void)expand_glob((dir.path / "missing.ckpt").string()),
                       doctest::Contains("no such checkpoint"), std::invalid_argument);
}

TEST_CASE("check suites pass and report degraded tolerance for coarse h") {
  std::ostringstream out;
  CHECK(cli_check("grad", 1e-5, 0, out) == kExitOk);

  // a coarse step widens the tolerance but the suite stays informative
  std::ostringstream coarse;
  CHECK(cli_check("grad", 1e-2, 0, coarse) == kExitOk);
  CHECK(coarse.str().find("tol 0.01") != std::string::npos);

  CHECK_THROWS_AS((void)cli_check("bogus", 1e-5, 0, out), std::invalid_argument);
}

TEST_CASE("mutated magic box makes the dice suite fail") {
  // sign-flipped operator: forward value still 1, gradient negated
  const MagicBoxFn flipped = [](Value tau) {
    Tape& t = *tau.tape;
    return t.exp(t.sub(t.stop_gradient(tau), tau));
  };
  const std::vector<CheckResult> results = check_dice_suite(0, flipped);
  CHECK_FALSE(all_pass(results));
  bool identity_failed = false;
  for (const CheckResult& r : results)
    if (r.name == "dice-score-identity") identity_failed = !r.pass;
  CHECK(identity_failed);
}

TEST_CASE("audit cli emits per-agent verdict lines") {
  TempDir dir("rpg_harness_audit");
  PolicyCheckpoint c;
  c.agent_id = "adversary";
  c.seats.push_back({Seat::col, {-9.0, -9.0, 9.0}});
  const std::string path = (dir.path / "adv.ckpt").string();
  save_checkpoint(path, c);
  std::ostringstream out;
  CHECK(cli_audit({path}, *find_builtin("fig2_coop"), 0.01, 0.05, out) == kExitOk);
  CHECK(out.str().find("agent adversary seat col: IRRATIONAL") != std::string::npos);
  CHECK(out.str().find("irrational strategies found") != std::string::npos);
}

TEST_CASE("output root env var relocates relative out dirs") {
  ExperimentConfig cfg;
  cfg.out_dir = "runs";
  setenv("RPG_OUTPUT_ROOT", "/tmp/rpg_root_test", 1);
  CHECK(cfg.resolved_out_dir() == "/tmp/rpg_root_test/runs");
  unsetenv("RPG_OUTPUT_ROOT");
  CHECK(cfg.resolved_out_dir() == "runs");
  cfg.out_dir = "/abs/path";
  setenv("RPG_OUTPUT_ROOT", "/tmp/rpg_root_test", 1);
  CHECK(cfg.resolved_out_dir() == "/abs/path");
  unsetenv("RPG_OUTPUT_ROOT");
}

}  // TEST_SUITE("harness")
