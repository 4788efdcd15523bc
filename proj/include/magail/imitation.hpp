#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "magail/discriminators.hpp"
#include "magail/game.hpp"
#include "magail/io.hpp"
#include "magail/mack.hpp"
#include "magail/rng.hpp"
#include "magail/solvers.hpp"

namespace magail {

/**
 * Maximum-likelihood tabular policy from demonstrations:
 *   pi_i(a | o) = (count(o, a) + alpha) / (count(o) + alpha |A_i|),
 * with unvisited observations falling back to the uniform row.
 */
inline JointPolicy behavior_cloning(const DemonstrationSet& demos, const GameDynamics& d,
                                    double alpha = 0.1) {
  if (demos.trajectories.empty())
    throw std::invalid_argument("behavior_cloning: empty demonstration set");
  if (alpha < 0.0) throw std::invalid_argument("behavior_cloning: alpha must be >= 0");

  JointPolicy pi;
  pi.obs = d.obs;
  for (int i = 0; i < d.num_agents; ++i) {
    const int num_obs = d.obs.observation_counts[i];
    const int num_actions = d.action_counts[i];
    std::vector<std::vector<double>> counts(num_obs, std::vector<double>(num_actions, 0.0));
    std::vector<double> totals(num_obs, 0.0);
    for (const Trajectory& traj : demos.trajectories)
      for (int t = 0; t < traj.horizon(); ++t) {
        int o = d.obs.obs(i, traj.states[t]);
        counts[o][traj.actions[t][i]] += 1.0;
        totals[o] += 1.0;
      }
    AgentPolicy ap;
    ap.probs.assign(num_obs, std::vector<double>(num_actions, 1.0 / num_actions));
    for (int o = 0; o < num_obs; ++o) {
      if (totals[o] == 0.0) continue;  // never visited: uniform row
      for (int a = 0; a < num_actions; ++a)
        ap.probs[o][a] = (counts[o][a] + alpha) / (totals[o] + alpha * num_actions);
    }
    pi.agents.push_back(std::move(ap));
  }
  return pi;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalResult {
  std::vector<double> mean;   // empirical discounted return per agent
  std::vector<double> stdev;  // across episodes
  std::vector<double> exact;  // occupancy-based expected return
};

/// Monte-Carlo discounted returns over fresh rollouts plus the exact
/// occupancy-based return; the two agree within sampling error.
inline EvalResult evaluate_policy(const MarkovGame& g, const JointPolicy& pi, int episodes,
                                  int horizon, Rng& rng) {
  ValidationReport rep = validate_game(g);
  if (!rep.ok()) throw std::invalid_argument("evaluate_policy: invalid game");
  GameDynamics d = strip_rewards(g, pi.obs);
  EvalResult out;
  out.mean.assign(g.num_agents, 0.0);
  out.stdev.assign(g.num_agents, 0.0);
  std::vector<std::vector<double>> returns(g.num_agents, std::vector<double>(episodes, 0.0));
  for (int e = 0; e < episodes; ++e) {
    Trajectory traj = sample_trajectory(d, pi, horizon, rng);
    double discount_pow = 1.0;
    for (int t = 0; t < traj.horizon(); ++t) {
      int ja = g.encode_action(traj.actions[t]);
      for (int i = 0; i < g.num_agents; ++i)
        returns[i][e] += discount_pow * g.rewards[i][traj.states[t]][ja];
      discount_pow *= g.discount;
    }
  }
  for (int i = 0; i < g.num_agents; ++i) {
    double m = 0.0;
    for (double r : returns[i]) m += r;
    m /= episodes;
    double var = 0.0;
    for (double r : returns[i]) var += (r - m) * (r - m);
    out.mean[i] = m;
    out.stdev[i] = episodes > 1 ? std::sqrt(var / (episodes - 1)) : 0.0;
    out.exact.push_back(expected_return(g, pi, i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adversarial imitation
// ---------------------------------------------------------------------------

struct MagailConfig {
  PriorVariant prior;
  MackConfig generator;  // batch size, rollout horizon, k, step sizes, damping
  double disc_lr = 0.5;
  int disc_steps = 10;
  // Expert pairs drawn per iteration; 0 balances the discriminator batch by
  // matching the policy side's pair count.
  int expert_batch_pairs = 0;
  int outer_iterations = 100;
  bool bc_pretrain = true;
  double bc_alpha = 0.1;
  double entropy_coef = 0.0;  // beta; 0 by default, ablation only
  int eval_every = 10;
  std::uint64_t seed = 0;
};

struct IterationMetrics {
  int iter = 0;
  std::vector<double> disc_objective;
  std::vector<double> gen_reward_mean;
  bool has_eval = false;
  std::vector<double> true_return_mean;
  std::vector<double> true_return_std;
};

struct RunRecord {
  std::vector<IterationMetrics> iterations;
  JointPolicy final_policy;
  DiscriminatorParams discriminator;  // learned reward model, final state
  std::string config_json;  // snapshot, attached by the caller
  std::uint64_t seed = 0;
  bool zero_sum_demo_fallback = false;
};

/// Per-agent (mean, std) of true returns; supplied by callers that own the
/// true-reward game so training itself never touches reward tables.
using EvalCallback =
    std::function<std::pair<std::vector<double>, std::vector<double>>(const JointPolicy&)>;

inline std::string run_record_csv(const RunRecord& rec) {
  CsvWriter csv("iter,agent,disc_obj,gen_reward_mean,true_return_mean,true_return_std");
  for (const auto& m : rec.iterations) {
    for (std::size_t i = 0; i < m.disc_objective.size(); ++i) {
      std::vector<std::string> cells = {std::to_string(m.iter), std::to_string(i),
                                        fmt12(m.disc_objective[i]), fmt12(m.gen_reward_mean[i]),
                                        "", ""};
      if (m.has_eval) {
        cells[4] = fmt12(m.true_return_mean[i]);
        cells[5] = fmt12(m.true_return_std[i]);
      }
      csv.row(cells);
    }
  }
  return csv.str();
}

namespace detail {

inline std::vector<std::pair<int, JointAction>> trajectory_pairs(const Batch& batch) {
  std::vector<std::pair<int, JointAction>> pairs;
  for (const auto& rt : batch)
    for (int t = 0; t < rt.traj.horizon(); ++t)
      pairs.emplace_back(rt.traj.states[t], rt.traj.actions[t]);
  return pairs;
}

inline std::vector<std::pair<int, JointAction>> sample_expert_pairs(const DemonstrationSet& demos,
                                                                    int count, Rng& rng) {
  std::vector<std::pair<int, JointAction>> flat;
  for (const auto& traj : demos.trajectories)
    for (int t = 0; t < traj.horizon(); ++t) flat.emplace_back(traj.states[t], traj.actions[t]);
  std::vector<std::pair<int, JointAction>> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(flat[rng.uniform_int(static_cast<int>(flat.size()))]);
  return out;
}

inline std::vector<std::pair<int, JointAction>> rollout_pairs(const GameDynamics& d,
                                                              const JointPolicy& pi, int episodes,
                                                              int horizon, Rng& rng) {
  std::vector<std::pair<int, JointAction>> pairs;
  for (int e = 0; e < episodes; ++e) {
    Trajectory traj = sample_trajectory(d, pi, horizon, rng);
    for (int t = 0; t < traj.horizon(); ++t) pairs.emplace_back(traj.states[t], traj.actions[t]);
  }
  return pairs;
}

/// One generator update (baselines then natural policy steps) on a batch
/// whose rewards were already attached.
inline void generator_update(const GameDynamics& d, PolicyParams& params, BaselineTable& baselines,
                             Batch& batch, const MackConfig& gen, double lr_scale,
                             const std::vector<int>& agents) {
  if (gen.entropy_coef > 0.0) {
    JointPolicy pi = params.to_policy(d.obs);
    for (auto& rt : batch)
      for (int t = 0; t < rt.traj.horizon(); ++t)
        for (int i : agents) {
          double p = pi.agent_prob(i, rt.traj.states[t], rt.traj.actions[t][i]);
          rt.rewards[t][i] -= gen.entropy_coef * std::log(std::max(p, 1e-12));
        }
  }
  for (int i : agents) {
    auto targets = compute_baseline_targets(d, batch, baselines, i, gen.advantage_horizon,
                                            d.discount);
    update_baselines(d, baselines, batch, targets, i, gen.baseline_lr * lr_scale);
    auto advantages = compute_advantages(d, batch, baselines, i, gen.advantage_horizon, d.discount);
    natural_policy_step(d, params, batch, advantages, i, gen.policy_lr * lr_scale,
                        gen.fisher_damping);
  }
}

}  // namespace detail

/**
 * Adversarial imitation on a reward-free game view. Per outer iteration:
 * sample a batch of rollouts from the current policy and a batch of expert
 * pairs, update the discriminator(s), score the rollouts with the
 * discriminator-induced rewards and take one generator step per agent.
 * Deterministic given the config seed.
 *
 * The zero-sum prior trains its value head from paired compositions
 * (expert agent 1 with the learner's agent 2, and vice versa), which needs
 * the expert policies themselves; with demonstrations only it falls back to
 * demo-versus-rollout pairing and flags the run record.
 */
inline RunRecord train_magail(const GameDynamics& d, const DemonstrationSet& demos,
                              const MagailConfig& cfg, const EvalCallback* eval = nullptr,
                              const JointPolicy* expert_policy = nullptr) {
  if (cfg.prior.kind == PriorKind::ZeroSum && d.num_agents != 2)
    throw std::invalid_argument("train_magail: zero-sum prior requires 2 agents");
  if (demos.trajectories.empty()) throw std::invalid_argument("train_magail: no demonstrations");

  MackConfig gen = cfg.generator;
  gen.entropy_coef = cfg.entropy_coef;

  RunRecord rec;
  rec.seed = cfg.seed;

  JointPolicy bc = behavior_cloning(demos, d, cfg.bc_alpha);
  PolicyParams params =
      cfg.bc_pretrain ? PolicyParams::from_policy(bc) : PolicyParams::zeros(d);
  rec.final_policy = cfg.bc_pretrain ? bc : params.to_policy(d.obs);
  if (cfg.outer_iterations == 0) return rec;

  BaselineTable baselines = BaselineTable::zeros(d);
  DiscriminatorParams disc = DiscriminatorParams::make(d, cfg.prior);
  Rng rollout_rng(cfg.seed, "magail.rollout");
  Rng expert_rng(cfg.seed, "magail.expert");
  Rng side_a_rng(cfg.seed, "magail.zs.side_a");
  Rng side_b_rng(cfg.seed, "magail.zs.side_b");

  for (int iter = 0; iter < cfg.outer_iterations; ++iter) {
    JointPolicy pi = params.to_policy(d.obs);

    Batch batch;
    batch.reserve(gen.batch_size);
    for (int e = 0; e < gen.batch_size; ++e) {
      RewardedTrajectory rt;
      rt.traj = sample_trajectory(d, pi, gen.rollout_horizon, rollout_rng);
      batch.push_back(std::move(rt));
    }

    IterationMetrics metrics;
    metrics.iter = iter;
    if (cfg.prior.kind == PriorKind::ZeroSum) {
      std::vector<std::pair<int, JointAction>> side_a, side_b;
      if (expert_policy != nullptr) {
        JointPolicy comp_a = compose_policy(*expert_policy, pi, cfg.prior.agent_one);
        JointPolicy comp_b = compose_policy(*expert_policy, pi, 1 - cfg.prior.agent_one);
        side_a = detail::rollout_pairs(d, comp_a, gen.batch_size, gen.rollout_horizon, side_a_rng);
        side_b = detail::rollout_pairs(d, comp_b, gen.batch_size, gen.rollout_horizon, side_b_rng);
      } else {
        rec.zero_sum_demo_fallback = true;
        side_a = detail::sample_expert_pairs(demos, gen.batch_size * gen.rollout_horizon,
                                             expert_rng);
        side_b = detail::trajectory_pairs(batch);
      }
      zero_sum_disc_update(disc, d, side_a, side_b, cfg.disc_lr, cfg.disc_steps);
      double mean_a = 0.0, mean_b = 0.0;
      for (const auto& [s, a] : side_a) mean_a += disc.weights[0][s][d.encode_action(a)];
      for (const auto& [s, a] : side_b) mean_b += disc.weights[0][s][d.encode_action(a)];
      double gap = mean_a / side_a.size() - mean_b / side_b.size();
      metrics.disc_objective.assign(d.num_agents, gap);
    } else {
      DiscBatch disc_batch;
      disc_batch.policy_side = detail::trajectory_pairs(batch);
      int expert_pairs = cfg.expert_batch_pairs > 0
                             ? cfg.expert_batch_pairs
                             : static_cast<int>(disc_batch.policy_side.size());
      disc_batch.expert_side = detail::sample_expert_pairs(demos, expert_pairs, expert_rng);
      double obj = disc_update(disc, d, disc_batch, cfg.disc_lr, cfg.disc_steps);
      metrics.disc_objective.assign(d.num_agents, obj);
    }

    metrics.gen_reward_mean.assign(d.num_agents, 0.0);
    int steps = 0;
    for (auto& rt : batch) {
      rt.rewards.reserve(rt.traj.horizon());
      for (int t = 0; t < rt.traj.horizon(); ++t) {
        auto r = policy_reward(disc, cfg.prior, d, rt.traj.states[t], rt.traj.actions[t]);
        for (int i = 0; i < d.num_agents; ++i) metrics.gen_reward_mean[i] += r[i];
        rt.rewards.push_back(std::move(r));
        ++steps;
      }
    }
    for (double& m : metrics.gen_reward_mean) m /= steps;

    double lr_scale = gen.linear_lr_decay
                          ? 1.0 - static_cast<double>(iter) / cfg.outer_iterations
                          : 1.0;
    std::vector<int> all_agents(d.num_agents);
    for (int i = 0; i < d.num_agents; ++i) all_agents[i] = i;
    detail::generator_update(d, params, baselines, batch, gen, lr_scale, all_agents);

    if (eval != nullptr && (iter % cfg.eval_every == 0 || iter + 1 == cfg.outer_iterations)) {
      auto [mean, stdev] = (*eval)(params.to_policy(d.obs));
      metrics.has_eval = true;
      metrics.true_return_mean = mean;
      metrics.true_return_std = stdev;
    }
    rec.iterations.push_back(std::move(metrics));
  }
  rec.final_policy = params.to_policy(d.obs);
  rec.discriminator = std::move(disc);
  return rec;
}

/**
 * Per-agent adversarial baseline: every agent is trained alone with a
 * decentralized discriminator while all other agents stay frozen at their
 * cloned policies; the separately trained agents are then assembled into one
 * joint policy.
 */
inline RunRecord train_gail_baseline(const GameDynamics& d, const DemonstrationSet& demos,
                                     const MagailConfig& cfg, const EvalCallback* eval = nullptr) {
  if (demos.trajectories.empty())
    throw std::invalid_argument("train_gail_baseline: no demonstrations");
  if (cfg.prior.kind == PriorKind::ZeroSum)
    throw std::invalid_argument("train_gail_baseline: per-agent baseline is decentralized");

  // With a single agent there is nobody to freeze; the procedure coincides
  // with decentralized adversarial training exactly.
  if (d.num_agents == 1) {
    MagailConfig single = cfg;
    single.prior.kind = PriorKind::Decentralized;
    return train_magail(d, demos, single, eval);
  }

  MackConfig gen = cfg.generator;
  gen.entropy_coef = cfg.entropy_coef;

  JointPolicy bc = behavior_cloning(demos, d, cfg.bc_alpha);
  JointPolicy assembled = bc;
  RunRecord rec;
  rec.seed = cfg.seed;
  rec.iterations.resize(cfg.outer_iterations);
  for (int iter = 0; iter < cfg.outer_iterations; ++iter) {
    rec.iterations[iter].iter = iter;
    rec.iterations[iter].disc_objective.assign(d.num_agents, 0.0);
    rec.iterations[iter].gen_reward_mean.assign(d.num_agents, 0.0);
  }

  PriorVariant decentralized{PriorKind::Decentralized, 0};
  for (int i = 0; i < d.num_agents && cfg.outer_iterations > 0; ++i) {
    PolicyParams params = cfg.bc_pretrain ? PolicyParams::from_policy(bc) : PolicyParams::zeros(d);
    BaselineTable baselines = BaselineTable::zeros(d);
    DiscriminatorParams disc = DiscriminatorParams::make(d, decentralized);
    std::string tag = "gail.agent" + std::to_string(i);
    Rng rollout_rng(cfg.seed, tag + ".rollout");
    Rng expert_rng(cfg.seed, tag + ".expert");

    for (int iter = 0; iter < cfg.outer_iterations; ++iter) {
      // Agent i follows its parameters; everyone else stays cloned.
      JointPolicy pi = bc;
      JointPolicy learned = params.to_policy(d.obs);
      pi.agents[i] = learned.agents[i];

      Batch batch;
      batch.reserve(gen.batch_size);
      for (int e = 0; e < gen.batch_size; ++e) {
        RewardedTrajectory rt;
        rt.traj = sample_trajectory(d, pi, gen.rollout_horizon, rollout_rng);
        batch.push_back(std::move(rt));
      }
      DiscBatch disc_batch;
      disc_batch.policy_side = detail::trajectory_pairs(batch);
      int expert_pairs = cfg.expert_batch_pairs > 0
                             ? cfg.expert_batch_pairs
                             : static_cast<int>(disc_batch.policy_side.size());
      disc_batch.expert_side = detail::sample_expert_pairs(demos, expert_pairs, expert_rng);
      double obj = disc_update(disc, d, disc_batch, cfg.disc_lr, cfg.disc_steps, i);
      rec.iterations[iter].disc_objective[i] = obj;

      double reward_sum = 0.0;
      int steps = 0;
      for (auto& rt : batch) {
        rt.rewards.reserve(rt.traj.horizon());
        for (int t = 0; t < rt.traj.horizon(); ++t) {
          auto r = policy_reward(disc, decentralized, d, rt.traj.states[t], rt.traj.actions[t]);
          reward_sum += r[i];
          rt.rewards.push_back(std::move(r));
          ++steps;
        }
      }
      rec.iterations[iter].gen_reward_mean[i] = reward_sum / steps;

      double lr_scale = gen.linear_lr_decay
                            ? 1.0 - static_cast<double>(iter) / cfg.outer_iterations
                            : 1.0;
      detail::generator_update(d, params, baselines, batch, gen, lr_scale, {i});
    }
    JointPolicy learned = params.to_policy(d.obs);
    assembled.agents[i] = learned.agents[i];
  }

  rec.final_policy = assembled;
  if (eval != nullptr && !rec.iterations.empty()) {
    auto [mean, stdev] = (*eval)(assembled);
    rec.iterations.back().has_eval = true;
    rec.iterations.back().true_return_mean = mean;
    rec.iterations.back().true_return_std = stdev;
  }
  return rec;
}

}  // namespace magail
