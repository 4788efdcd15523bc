#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "magail/game.hpp"
#include "magail/rng.hpp"

namespace magail {

/// Per-agent softmax logits theta[agent][obs][action]; rows are re-centered
/// to mean zero after every update.
struct PolicyParams {
  std::vector<std::vector<std::vector<double>>> logits;

  static PolicyParams zeros(const GameDynamics& d) {
    PolicyParams p;
    p.logits.resize(d.num_agents);
    for (int i = 0; i < d.num_agents; ++i)
      p.logits[i].assign(d.obs.observation_counts[i], std::vector<double>(d.action_counts[i], 0.0));
    return p;
  }

  /// Logits matching a given stochastic policy (log probabilities, floored).
  static PolicyParams from_policy(const JointPolicy& pi) {
    PolicyParams p;
    p.logits.resize(pi.num_agents());
    for (int i = 0; i < pi.num_agents(); ++i) {
      p.logits[i].reserve(pi.agents[i].probs.size());
      for (const auto& row : pi.agents[i].probs) {
        std::vector<double> lr(row.size());
        double mean = 0.0;
        for (std::size_t a = 0; a < row.size(); ++a) {
          lr[a] = std::log(std::max(row[a], 1e-12));
          mean += lr[a];
        }
        mean /= lr.size();
        for (double& x : lr) x -= mean;
        p.logits[i].push_back(std::move(lr));
      }
    }
    return p;
  }

  std::vector<double> row_probs(int agent, int obs) const {
    const auto& row = logits[agent][obs];
    double mx = row[0];
    for (double x : row) mx = std::max(mx, x);
    std::vector<double> p(row.size());
    double z = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a) {
      p[a] = std::exp(row[a] - mx);
      z += p[a];
    }
    for (double& x : p) x /= z;
    return p;
  }

  JointPolicy to_policy(const ObservationMap& obs) const {
    JointPolicy pi;
    pi.obs = obs;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      AgentPolicy ap;
      for (std::size_t o = 0; o < logits[i].size(); ++o)
        ap.probs.push_back(row_probs(static_cast<int>(i), static_cast<int>(o)));
      pi.agents.push_back(std::move(ap));
    }
    return pi;
  }
};

/// Centralized baselines V[agent][state][other-agents' joint action].
struct BaselineTable {
  std::vector<std::vector<std::vector<double>>> v;

  static BaselineTable zeros(const GameDynamics& d) {
    BaselineTable b;
    b.v.resize(d.num_agents);
    for (int i = 0; i < d.num_agents; ++i)
      b.v[i].assign(d.num_states, std::vector<double>(d.num_other_actions(i), 0.0));
    return b;
  }
};

struct MackConfig {
  int advantage_horizon = 5;  // k
  double policy_lr = 1.0;
  double baseline_lr = 0.5;
  bool linear_lr_decay = true;
  int batch_size = 32;  // trajectories per iteration
  int rollout_horizon = 50;
  int iterations = 200;
  double entropy_coef = 0.0;
  double fisher_damping = 1e-3;
  std::uint64_t seed = 0;
  std::string stream = "mack";
};

/// One rollout with per-step per-agent rewards attached.
struct RewardedTrajectory {
  Trajectory traj;
  std::vector<std::vector<double>> rewards;  // [t][agent]
};
using Batch = std::vector<RewardedTrajectory>;

/// Per-agent rewards for a state and joint action; the reward source is
/// either the game's true reward tables or a discriminator callback.
using RewardFn = std::function<std::vector<double>(int state, const JointAction&)>;

inline RewardFn true_reward_fn(const MarkovGame& g) {
  return [&g](int s, const JointAction& a) {
    int ja = g.encode_action(a);
    std::vector<double> r(g.num_agents);
    for (int i = 0; i < g.num_agents; ++i) r[i] = g.rewards[i][s][ja];
    return r;
  };
}

/**
 * k-step advantages with a centralized baseline:
 *   A_i(t) = sum_{j<m} gamma^j r_i(t+j) + gamma^m V_i(s_boot, a_{-i,t})
 *            - V_i(s_t, a_{-i,t})
 * where m = min(k, steps remaining) and s_boot is s_{t+m}, or the last
 * recorded state when the horizon truncates the lookahead.
 */
inline std::vector<std::vector<double>> compute_advantages(const GameDynamics& d,
                                                           const Batch& batch,
                                                           const BaselineTable& baseline,
                                                           int agent, int k, double gamma) {
  if (k < 1) throw std::invalid_argument("compute_advantages: k must be >= 1");
  std::vector<std::vector<double>> adv;
  adv.reserve(batch.size());
  for (const auto& rt : batch) {
    const int H = rt.traj.horizon();
    if (k > H) throw std::invalid_argument("compute_advantages: k exceeds trajectory length");
    std::vector<double> a_t(H, 0.0);
    for (int t = 0; t < H; ++t) {
      int other = d.encode_other_action(rt.traj.actions[t], agent);
      int m = std::min(k, H - t);
      double acc = 0.0, discount_pow = 1.0;
      for (int j = 0; j < m; ++j) {
        acc += discount_pow * rt.rewards[t + j][agent];
        discount_pow *= gamma;
      }
      int boot_state = rt.traj.states[std::min(t + m, H - 1)];
      acc += discount_pow * baseline.v[agent][boot_state][other];
      a_t[t] = acc - baseline.v[agent][rt.traj.states[t]][other];
    }
    adv.push_back(std::move(a_t));
  }
  return adv;
}

/// k-step bootstrap targets for the baseline, same truncation rule as the
/// advantages (targets equal advantage plus the current baseline).
inline std::vector<std::vector<double>> compute_baseline_targets(const GameDynamics& d,
                                                                 const Batch& batch,
                                                                 const BaselineTable& baseline,
                                                                 int agent, int k, double gamma) {
  auto targets = compute_advantages(d, batch, baseline, agent, k, gamma);
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (int t = 0; t < batch[e].traj.horizon(); ++t) {
      int other = d.encode_other_action(batch[e].traj.actions[t], agent);
      targets[e][t] += baseline.v[agent][batch[e].traj.states[t]][other];
    }
  return targets;
}

/**
 * Tabular regression step: every visited (state, a_{-i}) cell moves toward
 * the mean of its targets by lr. Returns the mean squared error after the
 * step. lr = 1 lands each cell exactly on its mean target.
 */
inline double update_baselines(const GameDynamics& d, BaselineTable& baseline, const Batch& batch,
                               const std::vector<std::vector<double>>& targets, int agent,
                               double lr) {
  struct CellStat {
    double sum = 0.0;
    int count = 0;
  };
  std::vector<std::vector<CellStat>> stats(d.num_states,
                                           std::vector<CellStat>(d.num_other_actions(agent)));
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (int t = 0; t < batch[e].traj.horizon(); ++t) {
      int s = batch[e].traj.states[t];
      int other = d.encode_other_action(batch[e].traj.actions[t], agent);
      stats[s][other].sum += targets[e][t];
      stats[s][other].count += 1;
    }
  for (int s = 0; s < d.num_states; ++s)
    for (int o = 0; o < d.num_other_actions(agent); ++o)
      if (stats[s][o].count > 0) {
        double mean = stats[s][o].sum / stats[s][o].count;
        baseline.v[agent][s][o] += lr * (mean - baseline.v[agent][s][o]);
      }

  double mse = 0.0;
  int n = 0;
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (int t = 0; t < batch[e].traj.horizon(); ++t) {
      int s = batch[e].traj.states[t];
      int other = d.encode_other_action(batch[e].traj.actions[t], agent);
      double err = baseline.v[agent][s][other] - targets[e][t];
      mse += err * err;
      ++n;
    }
  return n > 0 ? mse / n : 0.0;
}

/// Mean-over-steps surrogate E[log pi(a|o) A]; the quantity whose gradient
/// drives the policy update.
inline double surrogate_value(const GameDynamics& d, const PolicyParams& params, const Batch& batch,
                              const std::vector<std::vector<double>>& advantages, int agent) {
  double total = 0.0;
  int n = 0;
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (int t = 0; t < batch[e].traj.horizon(); ++t) {
      int o = d.obs.obs(agent, batch[e].traj.states[t]);
      auto probs = params.row_probs(agent, o);
      total += std::log(std::max(probs[batch[e].traj.actions[t][agent]], 1e-300)) *
               advantages[e][t];
      ++n;
    }
  return n > 0 ? total / n : 0.0;
}

/// Gradient of the surrogate with respect to one agent's logits.
inline std::vector<std::vector<double>> surrogate_gradient(
    const GameDynamics& d, const PolicyParams& params, const Batch& batch,
    const std::vector<std::vector<double>>& advantages, int agent) {
  std::vector<std::vector<double>> grad(d.obs.observation_counts[agent],
                                        std::vector<double>(d.action_counts[agent], 0.0));
  int n = 0;
  for (const auto& rt : batch) n += rt.traj.horizon();
  if (n == 0) return grad;
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (int t = 0; t < batch[e].traj.horizon(); ++t) {
      int o = d.obs.obs(agent, batch[e].traj.states[t]);
      int a = batch[e].traj.actions[t][agent];
      auto probs = params.row_probs(agent, o);
      double w = advantages[e][t] / n;
      for (int b = 0; b < d.action_counts[agent]; ++b)
        grad[o][b] += w * ((b == a ? 1.0 : 0.0) - probs[b]);
    }
  return grad;
}

namespace detail {

/// Applies (F + eps I)^{-1} g for the categorical Fisher F = diag(p) - p p^T
/// via Sherman-Morrison on B = diag(p) + eps I.
inline std::vector<double> natural_direction(std::span<const double> probs,
                                             std::span<const double> grad, double eps) {
  const std::size_t n = probs.size();
  std::vector<double> binv_g(n), binv_p(n);
  double p_binv_p = 0.0, p_binv_g = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    double b = probs[a] + eps;
    binv_g[a] = grad[a] / b;
    binv_p[a] = probs[a] / b;
    p_binv_p += probs[a] * binv_p[a];
    p_binv_g += probs[a] * binv_g[a];
  }
  double denom = 1.0 - p_binv_p;  // > 0 since sum p_a^2/(p_a+eps) < sum p_a = 1
  std::vector<double> dir(n);
  for (std::size_t a = 0; a < n; ++a) dir[a] = binv_g[a] + binv_p[a] * p_binv_g / denom;
  return dir;
}

}  // namespace detail

/**
 * Natural-gradient ascent step on one agent's logits: per observation row the
 * vanilla surrogate gradient is preconditioned by the exact inverse of the
 * damped categorical Fisher, then the row is re-centered to mean zero.
 */
inline void natural_policy_step(const GameDynamics& d, PolicyParams& params, const Batch& batch,
                                const std::vector<std::vector<double>>& advantages, int agent,
                                double lr, double fisher_damping) {
  auto grad = surrogate_gradient(d, params, batch, advantages, agent);
  for (int o = 0; o < d.obs.observation_counts[agent]; ++o) {
    bool nonzero = false;
    for (double gv : grad[o]) {
      if (!std::isfinite(gv)) throw std::runtime_error("natural_policy_step: non-finite gradient");
      if (gv != 0.0) nonzero = true;
    }
    if (!nonzero) continue;
    auto probs = params.row_probs(agent, o);
    auto dir = detail::natural_direction(probs, grad[o], fisher_damping);
    auto& row = params.logits[agent][o];
    double mean = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a) {
      row[a] += lr * dir[a];
      mean += row[a];
    }
    mean /= row.size();
    for (double& x : row) x -= mean;
  }
}

struct MackLogRow {
  int iter = 0;
  int agent = 0;
  double mean_return = 0.0;
  double surrogate = 0.0;
  double baseline_mse = 0.0;
  double lr = 0.0;
};

struct MackResult {
  JointPolicy policy;
  PolicyParams params;
  BaselineTable baselines;
  std::vector<MackLogRow> log;
};

/**
 * MACK training loop: per iteration, sample a batch from the current policy,
 * attach rewards, refresh the centralized baselines toward k-step targets and
 * take one natural policy step per agent with a linearly decayed step size.
 * Deterministic for a fixed (seed, stream).
 */
inline MackResult train_mack(const GameDynamics& d, const RewardFn& reward,
                             const MackConfig& cfg,
                             const PolicyParams* initial_params = nullptr) {
  PolicyParams params = initial_params ? *initial_params : PolicyParams::zeros(d);
  BaselineTable baselines = BaselineTable::zeros(d);
  Rng rng(cfg.seed, cfg.stream);
  MackResult result;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    JointPolicy pi = params.to_policy(d.obs);
    Batch batch;
    batch.reserve(cfg.batch_size);
    for (int e = 0; e < cfg.batch_size; ++e) {
      RewardedTrajectory rt;
      rt.traj = sample_trajectory(d, pi, cfg.rollout_horizon, rng);
      rt.rewards.reserve(rt.traj.horizon());
      for (int t = 0; t < rt.traj.horizon(); ++t)
        rt.rewards.push_back(reward(rt.traj.states[t], rt.traj.actions[t]));
      batch.push_back(std::move(rt));
    }
    if (cfg.entropy_coef > 0.0) {
      for (auto& rt : batch)
        for (int t = 0; t < rt.traj.horizon(); ++t)
          for (int i = 0; i < d.num_agents; ++i) {
            double p = pi.agent_prob(i, rt.traj.states[t], rt.traj.actions[t][i]);
            rt.rewards[t][i] -= cfg.entropy_coef * std::log(std::max(p, 1e-12));
          }
    }

    double lr_scale =
        cfg.linear_lr_decay ? 1.0 - static_cast<double>(iter) / cfg.iterations : 1.0;
    for (int i = 0; i < d.num_agents; ++i) {
      auto targets = compute_baseline_targets(d, batch, baselines, i, cfg.advantage_horizon,
                                              d.discount);
      double mse = update_baselines(d, baselines, batch, targets, i, cfg.baseline_lr * lr_scale);
      auto advantages =
          compute_advantages(d, batch, baselines, i, cfg.advantage_horizon, d.discount);
      double sur = surrogate_value(d, params, batch, advantages, i);
      natural_policy_step(d, params, batch, advantages, i, cfg.policy_lr * lr_scale,
                          cfg.fisher_damping);

      double mean_ret = 0.0;
      for (const auto& rt : batch) {
        double discount_pow = 1.0, ep = 0.0;
        for (int t = 0; t < rt.traj.horizon(); ++t) {
          ep += discount_pow * rt.rewards[t][i];
          discount_pow *= d.discount;
        }
        mean_ret += ep;
      }
      mean_ret /= batch.size();
      result.log.push_back({iter, i, mean_ret, sur, mse, cfg.policy_lr * lr_scale});
    }
  }
  result.params = params;
  result.baselines = baselines;
  result.policy = params.to_policy(d.obs);
  return result;
}

}  // namespace magail
