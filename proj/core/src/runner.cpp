#include "rpg/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace rpg {

namespace fs = std::filesystem;

std::string RunRecord::summary_line() const {
  std::ostringstream out;
  out << "seed " << seed << ": " << outcome;
  if (oscillating) out << " (oscillating)";
  out << ", steps " << steps_run;
  if (converged_at >= 0) out << ", converged at " << converged_at;
  if (!diagnostic.empty()) out << ", " << diagnostic;
  return out.str();
}

std::vector<std::string> write_checkpoints(const std::string& dir, const ObjectiveGraph& graph,
                                           const PolicySet& policies) {
  fs::create_directories(dir);
  std::vector<std::string> paths;
  for (const AgentNode& n : graph.nodes) {
    PolicyCheckpoint ckpt;
    ckpt.agent_id = n.id;
    ckpt.role = n.role;
    ckpt.trainable = n.trainable;
    if (n.has_row()) ckpt.seats.push_back({Seat::row, policies.at(n.row_policy).logits});
    if (n.has_col()) ckpt.seats.push_back({Seat::col, policies.at(n.col_policy).logits});
    const std::string path = (fs::path(dir) / (n.id + ".ckpt")).string();
    save_checkpoint(path, ckpt);
    paths.push_back(path);
  }
  return paths;
}

namespace {

void write_metric_rows(std::ostream& out, int64_t step, const StepMetrics& metrics) {
  // one row per edge, joined with its owner's loss/grad/probs
  for (const EdgeMetric& e : metrics.edges) {
    const AgentMetric* am = nullptr;
    for (const AgentMetric& a : metrics.agents)
      if (a.agent == e.owner) am = &a;
    out << step << "," << e.owner << "," << e.edge_id << "," << e.reward_mean << ",";
    if (am != nullptr) {
      out << am->loss << "," << am->grad_norm << ",";
      for (size_t k = 0; k < am->probs.size(); ++k) {
        if (k) out << ";";
        out << am->probs[k];
      }
    } else {
      out << ",,";
    }
    out << "\n";
  }
}

RunRecord run_one_seed(const ExperimentConfig& cfg, const PayoffGame& game, uint64_t seed,
                       const std::string& seed_dir) {
  fs::create_directories(seed_dir);
  RunRecord record;
  record.config_hash = cfg.hash();
  record.seed = seed;
  record.run_dir = seed_dir;
  record.metrics_path = (fs::path(seed_dir) / "metrics.csv").string();

  {
    std::ofstream cfg_out(fs::path(seed_dir) / "run_config.cfg");
    cfg_out << cfg.to_kv().serialize();
  }

  std::ofstream csv(record.metrics_path);
  csv.precision(10);
  csv << "# schema=" << kMetricsSchema << "\n";
  csv << "step,agent,edge,reward_mean,loss,grad_norm,probs\n";

  AlgorithmSpec spec = cfg.algo;
  spec.seed = seed;

  const auto t0 = std::chrono::steady_clock::now();
  RunResult result = run_training(
      spec, game, cfg.opts,
      [&](int64_t step, const StepMetrics& metrics) { write_metric_rows(csv, step, metrics); },
      [&](int64_t step, const ObjectiveGraph& graph, const PolicySet& policies) {
        std::ostringstream name;
        name << "step_" << std::setw(6) << std::setfill('0') << step;
        const std::string dir = (fs::path(seed_dir) / "checkpoints" / name.str()).string();
        write_checkpoints(dir, graph, policies);
        record.final_checkpoint_dir = dir;  // the last write is the final state
      });
  record.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  record.outcome = result.outcome;
  record.oscillating = result.oscillating;
  record.steps_run = result.steps_run;
  record.converged_at = result.converged_at;
  record.diagnostic = result.diagnostic;

  std::ofstream summary(fs::path(seed_dir) / "summary.txt");
  summary << "config_hash " << record.config_hash << "\n";
  summary << "seed " << seed << "\n";
  summary << "outcome " << record.outcome << "\n";
  summary << "oscillating " << (record.oscillating ? 1 : 0) << "\n";
  summary << "steps_run " << record.steps_run << "\n";
  summary << "converged_at " << record.converged_at << "\n";
  summary << "wall_clock_sec " << record.wall_clock_sec << "\n";
  summary << "final_checkpoints " << record.final_checkpoint_dir << "\n";
  if (!record.diagnostic.empty()) summary << "diagnostic " << record.diagnostic << "\n";
  return record;
}

}  // namespace

int cli_run(const ExperimentConfig& cfg, std::ostream& log, std::vector<RunRecord>* records) {
  const PayoffGame game = cfg.resolve_game();
  const fs::path base = fs::path(cfg.resolved_out_dir()) / cfg.resolved_run_name();
  int exit_code = kExitOk;
  for (uint64_t seed : cfg.seeds) {
    const std::string seed_dir = (base / ("seed" + std::to_string(seed))).string();
    RunRecord record = run_one_seed(cfg, game, seed, seed_dir);
    log << record.summary_line() << "\n";
    if (record.outcome == "diverged") exit_code = kExitNumerical;
    if (records != nullptr) records->push_back(std::move(record));
  }
  return exit_code;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
  const fs::path p(pattern);
  const std::string name = p.filename().string();
  if (name.find('*') == std::string::npos) {
    if (!fs::exists(p)) throw std::invalid_argument("no such checkpoint file: " + pattern);
    return {pattern};
  }
  const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
  if (!fs::exists(dir)) throw std::invalid_argument("no such directory: " + dir.string());
  // '*' matches any run of characters within the filename
  const size_t star = name.find('*');
  const std::string prefix = name.substr(0, star);
  const std::string suffix = name.substr(star + 1);
  std::vector<std::string> out;
  for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
    const std::string f = entry.path().filename().string();
    if (f.size() < prefix.size() + suffix.size()) continue;
    if (f.compare(0, prefix.size(), prefix) != 0) continue;
    if (f.compare(f.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw std::invalid_argument("glob matched no files: " + pattern);
  return out;
}

namespace {
std::vector<PolicyCheckpoint> load_many(const std::vector<std::string>& patterns) {
  std::vector<PolicyCheckpoint> out;
  for (const std::string& pattern : patterns)
    for (const std::string& path : expand_glob(pattern)) out.push_back(load_checkpoint(path));
  return out;
}
}  // namespace

int cli_crossplay(const std::vector<std::string>& checkpoint_patterns, const PayoffGame& game,
                  int episodes_per_cell, uint64_t seed, const std::string& out_csv,
                  std::ostream& log) {
  const std::vector<PolicyCheckpoint> ckpts = load_many(checkpoint_patterns);
  const CrossPlayGrid grid = crossplay_eval(ckpts, game, episodes_per_cell, seed);
  if (!out_csv.empty()) {
    fs::path p(out_csv);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    out << grid_csv(grid);
    log << "wrote " << grid.labels.size() << "x" << grid.labels.size() << " grid to " << out_csv
        << "\n";
  } else {
    log << grid_csv(grid);
  }
  return kExitOk;
}

int cli_sweep(const ExperimentConfig& base, const std::vector<SweepAxis>& grid, int jobs,
              std::ostream& log) {
  // cartesian product of the axes, base config when the grid is empty
  std::vector<std::vector<std::pair<std::string, std::string>>> combos{{}};
  for (const SweepAxis& axis : grid) {
    if (axis.values.empty())
      throw std::invalid_argument("sweep axis '" + axis.key + "' has no values");
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& combo : combos)
      for (const std::string& v : axis.values) {
        auto c = combo;
        c.emplace_back(axis.key, v);
        next.push_back(std::move(c));
      }
    combos = std::move(next);
  }

  struct Job {
    ExperimentConfig cfg;
    std::vector<std::pair<std::string, std::string>> combo;
    std::vector<RunRecord> records;
    std::string error;
  };
  std::vector<Job> jobs_list;
  const KeyValueConfig base_kv = base.to_kv();
  for (const auto& combo : combos) {
    KeyValueConfig kv = base_kv;
    std::ostringstream tag;
    for (size_t k = 0; k < combo.size(); ++k) {
      kv.set(combo[k].first, combo[k].second);
      if (k) tag << ",";
      tag << combo[k].first << "=" << combo[k].second;
    }
    Job job;
    job.cfg = ExperimentConfig::from_kv(kv);
    if (!combo.empty())
      job.cfg.run_name = base.resolved_run_name() + "/" + tag.str();
    job.combo = combo;
    jobs_list.push_back(std::move(job));
  }

  // worker pool; each run writes only inside its own directory
  std::atomic<size_t> cursor{0};
  const int workers = std::max(1, jobs);
  auto work = [&]() {
    for (;;) {
      const size_t idx = cursor.fetch_add(1);
      if (idx >= jobs_list.size()) return;
      Job& job = jobs_list[idx];
      std::ostringstream sink;
      try {
        cli_run(job.cfg, sink, &job.records);
      } catch (const std::exception& err) {
        job.error = err.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();

  const fs::path base_dir = fs::path(base.resolved_out_dir()) / base.resolved_run_name();
  fs::create_directories(base_dir);
  const std::string summary_path = (base_dir / "sweep_summary.csv").string();
  std::ofstream summary(summary_path);
  summary << "# schema=rpg-sweep-v1\n";
  for (const SweepAxis& axis : grid) summary << axis.key << ",";
  summary << "seed,outcome,oscillating,steps_run,converged_at\n";

  int exit_code = kExitOk;
  size_t rows = 0;
  for (const Job& job : jobs_list) {
    if (!job.error.empty()) {
      log << "sweep job failed: " << job.error << "\n";
      exit_code = kExitNumerical;
      continue;
    }
    for (const RunRecord& r : job.records) {
      for (const auto& [key, value] : job.combo) summary << value << ",";
      summary << r.seed << "," << r.outcome << "," << (r.oscillating ? 1 : 0) << ","
              << r.steps_run << "," << r.converged_at << "\n";
      ++rows;
    }
  }
  log << "sweep complete: " << rows << " runs, summary at " << summary_path << "\n";
  return exit_code;
}

int cli_check(const std::string& suite, double h, uint64_t seed, std::ostream& out) {
  std::vector<CheckResult> results;
  auto extend = [&](std::vector<CheckResult> more) {
    results.insert(results.end(), more.begin(), more.end());
  };
  if (suite == "grad" || suite == "all") extend(check_grad_suite(h));
  if (suite == "oracle" || suite == "all") extend(check_oracle_suite(seed));
  if (suite == "dice" || suite == "all") extend(check_dice_suite(seed));
  if (results.empty())
    throw std::invalid_argument("unknown check suite '" + suite +
                                "' (expected grad|oracle|dice|all)");
  print_results(results, out);
  return all_pass(results) ? kExitOk : kExitCheckFailed;
}

int cli_audit(const std::vector<std::string>& checkpoint_patterns, const PayoffGame& game,
              double grid_delta, double support_tol, std::ostream& out) {
  const std::vector<PolicyCheckpoint> ckpts = load_many(checkpoint_patterns);
  const AuditReport report = sabotage_audit(ckpts, game, grid_delta, support_tol);
  out << report.text();
  out << (report.all_rational() ? "audit: all strategies rational\n"
                                : "audit: irrational strategies found\n");
  return kExitOk;
}

}  // namespace rpg
