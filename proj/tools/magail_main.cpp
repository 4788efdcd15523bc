// Experiment runner: builds the grid games, solves or trains experts,
// collects demonstrations, runs the imitation methods and verifies the
// tabular theory checks. All outputs are deterministic functions of the
// config file bytes.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "magail/config_json.hpp"
#include "magail/envs.hpp"
#include "magail/equilibria.hpp"
#include "magail/imitation.hpp"
#include "magail/io.hpp"
#include "magail/mack.hpp"
#include "magail/solvers.hpp"
#include "magail/theory.hpp"

namespace fs = std::filesystem;
using namespace magail;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitTheory = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_override;
  std::int64_t seed_override = -1;
};

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = load_experiment_config(args.config_path);
  if (!args.out_override.empty()) cfg.out_dir = args.out_override;
  if (args.seed_override >= 0) {
    cfg.seed = static_cast<std::uint64_t>(args.seed_override);
    cfg.magail.seed = cfg.seed;
    cfg.expert_mack.seed = cfg.seed;
  }
  fs::create_directories(cfg.out_dir);
  return cfg;
}

void write_config_snapshot(const ExperimentConfig& cfg, const json& extra = json::object()) {
  json snapshot = cfg.raw;
  snapshot["seed"] = cfg.seed;
  snapshot["out_dir"] = cfg.out_dir;
  for (auto it = extra.begin(); it != extra.end(); ++it) snapshot[it.key()] = it.value();
  atomic_write(fs::path(cfg.out_dir) / "config_snapshot.json", snapshot.dump(2) + "\n");
}

std::string mack_log_csv(const std::vector<MackLogRow>& log) {
  CsvWriter csv("iter,agent,mean_return,surrogate,baseline_mse,lr");
  for (const auto& row : log)
    csv.row({std::to_string(row.iter), std::to_string(row.agent), fmt12(row.mean_return),
             fmt12(row.surrogate), fmt12(row.baseline_mse), fmt12(row.lr)});
  return csv.str();
}

int cmd_make_expert(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args);
  BuiltGame built = build_env(cfg.game_tag, cfg.grid);
  fs::path out(cfg.out_dir);

  JointPolicy expert;
  json report;
  if (cfg.expert_method == "team_vi") {
    auto [pi, rep] = solve_team_vi(built.game, cfg.expert_tol);
    expert = pi;
    report = {{"method", "team_vi"},
              {"iterations", rep.iterations},
              {"residual", rep.residual},
              {"tolerance", rep.tolerance}};
  } else if (cfg.expert_method == "zerosum_shapley") {
    auto [pi, rep] = solve_zero_sum_shapley(built.game, cfg.expert_tol);
    expert = pi;
    report = {{"method", "zerosum_shapley"},
              {"iterations", rep.iterations},
              {"residual", rep.residual},
              {"tolerance", rep.tolerance}};
  } else if (cfg.expert_method == "analytic") {
    expert = coop_comm_expert(cfg.grid, built.obs);
    report = {{"method", "analytic"}};
  } else {  // mack on the true rewards
    GameDynamics dynamics = strip_rewards(built.game, built.obs);
    MackResult res = train_mack(dynamics, true_reward_fn(built.game), cfg.expert_mack);
    expert = res.policy;
    atomic_write(out / "expert_training_log.csv", mack_log_csv(res.log));
    report = {{"method", "mack"}, {"iterations", cfg.expert_mack.iterations}};
  }

  // Solver experts act on raw states; certify them before shipping. The
  // analytic communicative expert is observation-restricted, so state-level
  // certification does not apply to it.
  if (cfg.expert_method == "team_vi" || cfg.expert_method == "zerosum_shapley") {
    NashCheckResult check =
        nash_check(built.game, expert, 10.0 * cfg.expert_tol / (1.0 - built.game.discount));
    report["nash_certified"] = check.is_nash;
    report["nash_max_violation"] = check.max_violation;
    if (!check.is_nash) {
      std::fprintf(stderr, "expert failed its equilibrium certificate (violation %g)\n",
                   check.max_violation);
      return kExitRuntime;
    }
  }

  write_policy(out / "expert_policy.txt", expert, built.obs);
  atomic_write(out / "expert_report.json", report.dump(2) + "\n");
  write_config_snapshot(cfg);
  std::printf("expert written to %s\n", (out / "expert_policy.txt").c_str());
  return kExitOk;
}

int cmd_collect_demos(const CommonArgs& args, const std::string& expert_path) {
  ExperimentConfig cfg = load_config(args);
  if (cfg.demos.episodes < 1) throw ConfigError("demos.episodes must be >= 1");
  BuiltGame built = build_env(cfg.game_tag, cfg.grid);
  fs::path out(cfg.out_dir);
  fs::path expert_file = expert_path.empty() ? out / "expert_policy.txt" : fs::path(expert_path);
  JointPolicy expert = read_policy(expert_file, built.obs, built.game.num_states);

  DemonstrationSet demos = collect_demonstrations(built.game, expert, cfg.demos.episodes,
                                                  cfg.demos.horizon, {cfg.seed, "demos"});
  write_demonstrations(out / "demos.txt", demos);
  std::printf("wrote %d episodes x %d steps to %s\n", demos.num_episodes(), demos.horizon,
              (out / "demos.txt").c_str());
  return kExitOk;
}

int cmd_train(const CommonArgs& args, const std::string& demos_path,
              const std::string& expert_path) {
  ExperimentConfig cfg = load_config(args);
  BuiltGame built = build_env(cfg.game_tag, cfg.grid);
  fs::path out(cfg.out_dir);
  fs::path demo_file = demos_path.empty() ? out / "demos.txt" : fs::path(demos_path);
  DemonstrationSet demos = read_demonstrations(demo_file);
  GameDynamics dynamics = strip_rewards(built.game, built.obs);

  // The zero-sum prior only fits the structurally zero-sum two-agent task.
  if (cfg.imitation_method == "magail_zs" && cfg.game_tag != "keep_away")
    throw ConfigError("imitation.method magail_zs requires the zero-sum keep_away game");

  RunRecord record;
  record.seed = cfg.seed;
  if (cfg.imitation_method == "bc") {
    record.final_policy = behavior_cloning(demos, dynamics, cfg.magail.bc_alpha);
  } else if (cfg.imitation_method == "gail") {
    record = train_gail_baseline(dynamics, demos, cfg.magail);
  } else if (cfg.imitation_method == "magail_zs") {
    fs::path expert_file =
        expert_path.empty() ? out / "expert_policy.txt" : fs::path(expert_path);
    if (fs::exists(expert_file)) {
      JointPolicy expert = read_policy(expert_file, built.obs, built.game.num_states);
      record = train_magail(dynamics, demos, cfg.magail, nullptr, &expert);
    } else {
      record = train_magail(dynamics, demos, cfg.magail, nullptr, nullptr);
    }
  } else {
    record = train_magail(dynamics, demos, cfg.magail);
  }

  atomic_write(out / "run_record.csv", run_record_csv(record));
  write_policy(out / "policy.txt", record.final_policy, built.obs);
  if (cfg.imitation_method != "bc" && !record.discriminator.weights.empty()) {
    bool shared = record.discriminator.kind != PriorKind::Decentralized;
    atomic_write(out / "discriminator.txt",
                 encode_discriminator_cells(record.discriminator.weights, shared));
  }
  write_config_snapshot(cfg, {{"zero_sum_demo_fallback", record.zero_sum_demo_fallback}});
  std::printf("trained %s; policy at %s\n", cfg.imitation_method.c_str(),
              (out / "policy.txt").c_str());
  return kExitOk;
}

int cmd_evaluate(const CommonArgs& args, const std::string& policy_path) {
  ExperimentConfig cfg = load_config(args);
  BuiltGame built = build_env(cfg.game_tag, cfg.grid);
  fs::path out(cfg.out_dir);
  fs::path policy_file = policy_path.empty() ? out / "policy.txt" : fs::path(policy_path);
  JointPolicy pi = read_policy(policy_file, built.obs, built.game.num_states);

  Rng rng(cfg.seed, "evaluation");
  EvalResult res =
      evaluate_policy(built.game, pi, cfg.evaluation.episodes, cfg.evaluation.horizon, rng);

  CsvWriter csv("agent,mean,std,exact");
  std::printf("%-6s %14s %14s %14s\n", "agent", "mean", "std", "exact");
  for (int i = 0; i < built.game.num_agents; ++i) {
    csv.row({std::to_string(i), fmt12(res.mean[i]), fmt12(res.stdev[i]), fmt12(res.exact[i])});
    std::printf("%-6d %14.6f %14.6f %14.6f\n", i, res.mean[i], res.stdev[i], res.exact[i]);
  }
  csv.save(out / "evaluation.csv");
  return kExitOk;
}

int cmd_verify_theory(const CommonArgs& args, const std::string& suite, long long budget,
                      bool inject_invalid) {
  std::uint64_t seed = 7;
  std::string out_dir = "runs/theory";
  if (!args.config_path.empty()) {
    ExperimentConfig cfg = load_experiment_config(args.config_path);
    seed = cfg.seed;
    out_dir = cfg.out_dir;
  }
  if (args.seed_override >= 0) seed = static_cast<std::uint64_t>(args.seed_override);
  if (!args.out_override.empty()) out_dir = args.out_override;
  fs::create_directories(out_dir);

  std::vector<CheckRow> rows;
  try {
    if (suite == "all") {
      rows = run_theory_suite(seed, budget, inject_invalid);
    } else if (suite == "feasibility") {
      rows = feasibility_rows(seed);
    } else if (suite == "unrolled") {
      rows = unrolled_verdict_rows(seed, budget);
    } else if (suite == "dual") {
      rows = dual_convergence_rows(seed);
    } else if (suite == "occupancy") {
      rows = occupancy_rows(seed);
    } else if (suite == "psi_star") {
      rows = psi_star_rows(seed);
    } else {
      throw ConfigError("unknown suite '" + suite + "'");
    }
  } catch (const BudgetError& e) {
    rows.push_back({"suite.budget_exceeded", suite, 0.0, static_cast<double>(budget), false});
    std::fprintf(stderr, "partial run: %s\n", e.what());
  }

  atomic_write(fs::path(out_dir) / "theory_checks.csv", check_rows_csv(rows));
  int failures = 0;
  for (const auto& r : rows)
    if (!r.pass) ++failures;
  std::printf("%zu checks, %d failed; rows at %s\n", rows.size(), failures,
              (fs::path(out_dir) / "theory_checks.csv").c_str());
  if (failures > 0) {
    for (const auto& r : rows)
      if (!r.pass)
        std::fprintf(stderr, "FAIL %s %s value=%g bound=%g\n", r.check.c_str(),
                     r.instance.c_str(), r.value, r.bound);
    return kExitTheory;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabular multi-agent adversarial imitation lab"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string demos_path, expert_path, policy_path;
  std::string suite = "all";
  long long budget = 10'000'000;
  bool inject_invalid = false;

  auto add_common = [&common](CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", common.config_path, "experiment config (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--out", common.out_override, "output directory override");
    cmd->add_option("--seed", common.seed_override, "seed override");
  };

  CLI::App* make_expert = app.add_subcommand("make-expert", "solve or train the expert policy");
  add_common(make_expert, true);

  CLI::App* collect = app.add_subcommand("collect-demos", "sample expert demonstrations");
  add_common(collect, true);
  collect->add_option("--expert", expert_path, "expert policy file");

  CLI::App* train = app.add_subcommand("train", "run an imitation method on demonstrations");
  add_common(train, true);
  train->add_option("--demos", demos_path, "demonstration file");
  train->add_option("--expert", expert_path, "expert policy file (zero-sum pairing)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a policy on true rewards");
  add_common(evaluate, true);
  evaluate->add_option("--policy", policy_path, "policy file");

  CLI::App* verify = app.add_subcommand("verify-theory", "run the exact theory check sweeps");
  add_common(verify, false);
  verify->add_option("--suite", suite, "all|feasibility|unrolled|dual|occupancy|psi_star");
  verify->add_option("--budget", budget, "enumeration budget for unrolled checks");
  verify->add_flag("--inject-invalid-game", inject_invalid,
                   "debug: corrupt a probe game to exercise the failure path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (make_expert->parsed()) return cmd_make_expert(common);
    if (collect->parsed()) return cmd_collect_demos(common, expert_path);
    if (train->parsed()) return cmd_train(common, demos_path, expert_path);
    if (evaluate->parsed()) return cmd_evaluate(common, policy_path);
    if (verify->parsed()) return cmd_verify_theory(common, suite, budget, inject_invalid);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "refused: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
