#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "magail/game.hpp"

namespace magail {

/// Reward-structure priors: a single shared classifier over (s, joint a),
/// one classifier per agent over (o_i, a_i), or a two-agent value head whose
/// score is agent 1's reward and its negation agent 2's.
enum class PriorKind { Centralized, Decentralized, ZeroSum };

inline std::string prior_name(PriorKind k) {
  switch (k) {
    case PriorKind::Centralized: return "centralized";
    case PriorKind::Decentralized: return "decentralized";
    case PriorKind::ZeroSum: return "zerosum";
  }
  return "?";
}

struct PriorVariant {
  PriorKind kind = PriorKind::Decentralized;
  int agent_one = 0;  // zero-sum role assignment: which agent's reward is +v
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Logit tables, shaped per prior. Scores pass through a sigmoid and are
/// clamped to [clamp, 1 - clamp].
struct DiscriminatorParams {
  PriorKind kind = PriorKind::Decentralized;
  std::vector<std::vector<std::vector<double>>> weights;
  double clamp = 1e-6;

  static DiscriminatorParams make(const GameDynamics& d, const PriorVariant& prior) {
    DiscriminatorParams p;
    p.kind = prior.kind;
    switch (prior.kind) {
      case PriorKind::Centralized:
      case PriorKind::ZeroSum:
        p.weights.assign(1, std::vector<std::vector<double>>(
                                d.num_states, std::vector<double>(d.num_joint_actions(), 0.0)));
        if (prior.kind == PriorKind::ZeroSum && d.num_agents != 2)
          throw std::invalid_argument("zero-sum prior requires exactly 2 agents");
        break;
      case PriorKind::Decentralized:
        p.weights.resize(d.num_agents);
        for (int i = 0; i < d.num_agents; ++i)
          p.weights[i].assign(d.obs.observation_counts[i],
                              std::vector<double>(d.action_counts[i], 0.0));
        break;
    }
    return p;
  }

  double clamped_score(double logit) const {
    return std::min(1.0 - clamp, std::max(clamp, sigmoid(logit)));
  }
};

/// Per-agent scores D_i in (0, 1) for a state and joint action.
inline std::vector<double> disc_forward(const DiscriminatorParams& p, const GameDynamics& d,
                                        int s, const JointAction& a) {
  if (s < 0 || s >= d.num_states) throw std::out_of_range("disc_forward: state index");
  for (int i = 0; i < d.num_agents; ++i)
    if (a[i] < 0 || a[i] >= d.action_counts[i])
      throw std::out_of_range("disc_forward: action index");
  std::vector<double> scores(d.num_agents);
  switch (p.kind) {
    case PriorKind::Centralized:
    case PriorKind::ZeroSum: {
      double sc = p.clamped_score(p.weights[0][s][d.encode_action(a)]);
      for (int i = 0; i < d.num_agents; ++i) scores[i] = sc;
      break;
    }
    case PriorKind::Decentralized:
      for (int i = 0; i < d.num_agents; ++i)
        scores[i] = p.clamped_score(p.weights[i][d.obs.obs(i, s)][a[i]]);
      break;
  }
  return scores;
}

/// Generator rewards. Centralized/decentralized priors reward the policy with
/// -log D_i, which is strictly positive; the zero-sum head's raw logit is
/// agent 1's reward and its negation agent 2's.
inline std::vector<double> policy_reward(const DiscriminatorParams& p, const PriorVariant& prior,
                                         const GameDynamics& d, int s, const JointAction& a) {
  std::vector<double> r(d.num_agents);
  if (p.kind == PriorKind::ZeroSum) {
    if (s < 0 || s >= d.num_states) throw std::out_of_range("policy_reward: state index");
    double v = p.weights[0][s][d.encode_action(a)];
    r[prior.agent_one] = v;
    r[1 - prior.agent_one] = -v;
    return r;
  }
  std::vector<double> scores = disc_forward(p, d, s, a);
  for (int i = 0; i < d.num_agents; ++i) r[i] = -std::log(scores[i]);
  return r;
}

/// Policy-side pairs (scored with log D) and expert-side pairs (log(1 - D)).
struct DiscBatch {
  std::vector<std::pair<int, JointAction>> policy_side;
  std::vector<std::pair<int, JointAction>> expert_side;
};

namespace detail {

struct CellCounts {
  // accumulated per flat cell: policy-side count, expert-side count
  std::vector<double> policy, expert;
};

/// Objective E_chi[log D] + E_chiE[log(1 - D)] and its gradient in logits for
/// a single table; side expectations are means.
inline double logistic_objective_and_grad(const std::vector<std::vector<double>>& w,
                                          const CellCounts& counts, double n_policy,
                                          double n_expert, double clamp,
                                          std::vector<std::vector<double>>* grad) {
  double obj = 0.0;
  const int rows = static_cast<int>(w.size());
  const int cols = rows > 0 ? static_cast<int>(w[0].size()) : 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::size_t flat = static_cast<std::size_t>(r) * cols + c;
      double np = counts.policy[flat], ne = counts.expert[flat];
      if (np == 0.0 && ne == 0.0) continue;
      double sc = std::min(1.0 - clamp, std::max(clamp, sigmoid(w[r][c])));
      obj += (np / n_policy) * std::log(sc) + (ne / n_expert) * std::log(1.0 - sc);
      if (grad) (*grad)[r][c] = (np / n_policy) * (1.0 - sc) - (ne / n_expert) * sc;
    }
  return obj;
}

}  // namespace detail

/**
 * Gradient ascent on the per-agent logistic objective
 *   E_chi[log D_i] + E_chiE[log(1 - D_i)].
 * Returns the objective summed over the updated tables after the final step.
 * On a fixed batch the converged score per cell is the policy-count fraction.
 * `only_table` restricts the update to one agent's scorer (the per-agent
 * baseline trains a single agent at a time); -1 updates all.
 */
inline double disc_update(DiscriminatorParams& p, const GameDynamics& d, const DiscBatch& batch,
                          double lr, int steps, int only_table = -1) {
  if (batch.policy_side.empty() || batch.expert_side.empty())
    throw std::invalid_argument("disc_update: both batch sides must be non-empty");
  const double n_policy = static_cast<double>(batch.policy_side.size());
  const double n_expert = static_cast<double>(batch.expert_side.size());

  const int num_tables = static_cast<int>(p.weights.size());
  std::vector<detail::CellCounts> counts(num_tables);
  for (int tbl = 0; tbl < num_tables; ++tbl) {
    std::size_t cells = p.weights[tbl].size() * (p.weights[tbl].empty() ? 0 : p.weights[tbl][0].size());
    counts[tbl].policy.assign(cells, 0.0);
    counts[tbl].expert.assign(cells, 0.0);
  }
  auto flat_index = [&](int tbl, int s, const JointAction& a) -> std::size_t {
    const int cols = static_cast<int>(p.weights[tbl][0].size());
    if (p.kind == PriorKind::Decentralized)
      return static_cast<std::size_t>(d.obs.obs(tbl, s)) * cols + a[tbl];
    return static_cast<std::size_t>(s) * cols + d.encode_action(a);
  };
  for (const auto& [s, a] : batch.policy_side)
    for (int tbl = 0; tbl < num_tables; ++tbl) counts[tbl].policy[flat_index(tbl, s, a)] += 1.0;
  for (const auto& [s, a] : batch.expert_side)
    for (int tbl = 0; tbl < num_tables; ++tbl) counts[tbl].expert[flat_index(tbl, s, a)] += 1.0;

  double objective = 0.0;
  for (int tbl = 0; tbl < num_tables; ++tbl) {
    if (only_table >= 0 && tbl != only_table) continue;
    std::vector<std::vector<double>> grad(p.weights[tbl].size(),
                                          std::vector<double>(p.weights[tbl][0].size(), 0.0));
    for (int step = 0; step < steps; ++step) {
      detail::logistic_objective_and_grad(p.weights[tbl], counts[tbl], n_policy, n_expert,
                                          p.clamp, &grad);
      for (std::size_t r = 0; r < grad.size(); ++r)
        for (std::size_t c = 0; c < grad[r].size(); ++c) p.weights[tbl][r][c] += lr * grad[r][c];
    }
    objective += detail::logistic_objective_and_grad(p.weights[tbl], counts[tbl], n_policy,
                                                     n_expert, p.clamp, nullptr);
  }
  return objective;
}

/**
 * Zero-sum head update: ascends mean v over side A (expert agent 1 paired
 * with the learner's agent 2) minus mean v over side B (learner agent 1,
 * expert agent 2), pushing the score toward agent 1's expected outcome.
 */
inline void zero_sum_disc_update(DiscriminatorParams& p, const GameDynamics& d,
                                 const std::vector<std::pair<int, JointAction>>& side_a,
                                 const std::vector<std::pair<int, JointAction>>& side_b,
                                 double lr, int steps) {
  if (p.kind != PriorKind::ZeroSum)
    throw std::invalid_argument("zero_sum_disc_update: discriminator is not zero-sum");
  if (d.num_agents != 2) throw std::invalid_argument("zero_sum_disc_update: requires 2 agents");
  if (side_a.empty() || side_b.empty())
    throw std::invalid_argument("zero_sum_disc_update: both sides must be non-empty");

  const int cols = d.num_joint_actions();
  std::vector<long> count_a(static_cast<std::size_t>(d.num_states) * cols, 0);
  std::vector<long> count_b(count_a.size(), 0);
  for (const auto& [s, a] : side_a) count_a[static_cast<std::size_t>(s) * cols + d.encode_action(a)]++;
  for (const auto& [s, a] : side_b) count_b[static_cast<std::size_t>(s) * cols + d.encode_action(a)]++;
  // The objective is linear in the head, so the gradient is constant in w and
  // `steps` scaled steps are a single larger step. Identical sides cancel
  // exactly cell by cell.
  for (int s = 0; s < d.num_states; ++s)
    for (int c = 0; c < cols; ++c) {
      std::size_t flat = static_cast<std::size_t>(s) * cols + c;
      double grad = static_cast<double>(count_a[flat]) / side_a.size() -
                    static_cast<double>(count_b[flat]) / side_b.size();
      p.weights[0][s][c] += lr * steps * grad;
    }
}

}  // namespace magail
