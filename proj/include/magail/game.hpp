#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "magail/rng.hpp"

namespace magail {

using JointAction = std::vector<int>;

/// One sparse entry of a transition distribution.
struct TransitionEntry {
  int state;
  double prob;
};
using TransitionRow = std::vector<TransitionEntry>;

/**
 * Finite N-agent Markov game: shared state set, per-agent action sets, a
 * joint-action transition kernel, per-agent reward tables, an initial state
 * distribution and a discount in [0, 1).
 *
 * Joint actions are addressed by a mixed-radix index with agent 0 varying
 * fastest; transition rows are stored sparsely since grid dynamics touch only
 * a handful of successor states.
 */
struct MarkovGame {
  int num_agents = 0;
  int num_states = 0;
  std::vector<int> action_counts;
  // transition[s][joint_action] -> distribution over next states
  std::vector<std::vector<TransitionRow>> transition;
  // rewards[agent][s][joint_action]
  std::vector<std::vector<std::vector<double>>> rewards;
  std::vector<double> initial_dist;
  double discount = 0.9;
  double reward_bound = 1.0;  // declared R_max
  std::string id;

  int num_joint_actions() const {
    int n = 1;
    for (int a : action_counts) n *= a;
    return n;
  }

  int encode_action(std::span<const int> action) const {
    int idx = 0;
    int stride = 1;
    for (int i = 0; i < num_agents; ++i) {
      idx += action[i] * stride;
      stride *= action_counts[i];
    }
    return idx;
  }

  JointAction decode_action(int idx) const {
    JointAction a(num_agents);
    for (int i = 0; i < num_agents; ++i) {
      a[i] = idx % action_counts[i];
      idx /= action_counts[i];
    }
    return a;
  }

  /// Joint index of the other agents' actions (mixed radix, skipping `agent`).
  int encode_other_action(std::span<const int> action, int agent) const {
    int idx = 0;
    int stride = 1;
    for (int i = 0; i < num_agents; ++i) {
      if (i == agent) continue;
      idx += action[i] * stride;
      stride *= action_counts[i];
    }
    return idx;
  }

  int num_other_actions(int agent) const {
    int n = 1;
    for (int i = 0; i < num_agents; ++i)
      if (i != agent) n *= action_counts[i];
    return n;
  }
};

/// Deterministic per-agent projection from states to observation indices.
struct ObservationMap {
  std::vector<int> observation_counts;          // per agent
  std::vector<std::vector<int>> state_to_obs;   // [agent][state]

  static ObservationMap identity(int num_agents, int num_states) {
    ObservationMap m;
    m.observation_counts.assign(num_agents, num_states);
    m.state_to_obs.assign(num_agents, std::vector<int>(num_states));
    for (int i = 0; i < num_agents; ++i)
      for (int s = 0; s < num_states; ++s) m.state_to_obs[i][s] = s;
    return m;
  }

  int obs(int agent, int state) const { return state_to_obs[agent][state]; }
  int num_agents() const { return static_cast<int>(observation_counts.size()); }
};

/// Row-stochastic table over observations: probs[obs][action].
struct AgentPolicy {
  std::vector<std::vector<double>> probs;

  static AgentPolicy uniform(int num_obs, int num_actions) {
    AgentPolicy p;
    p.probs.assign(num_obs, std::vector<double>(num_actions, 1.0 / num_actions));
    return p;
  }
  static AgentPolicy deterministic(int num_obs, int num_actions, int action) {
    AgentPolicy p;
    p.probs.assign(num_obs, std::vector<double>(num_actions, 0.0));
    for (int o = 0; o < num_obs; ++o) p.probs[o][action] = 1.0;
    return p;
  }
};

/// Product policy: each agent acts on its own observation of the state.
struct JointPolicy {
  std::vector<AgentPolicy> agents;
  ObservationMap obs;

  int num_agents() const { return static_cast<int>(agents.size()); }
  double agent_prob(int agent, int state, int action) const {
    return agents[agent].probs[obs.obs(agent, state)][action];
  }
  static JointPolicy uniform(const MarkovGame& g, const ObservationMap& m) {
    JointPolicy p;
    p.obs = m;
    for (int i = 0; i < g.num_agents; ++i)
      p.agents.push_back(AgentPolicy::uniform(m.observation_counts[i], g.action_counts[i]));
    return p;
  }
};

/// Fixed-horizon rollout: aligned state and joint-action sequences.
struct Trajectory {
  std::vector<int> states;
  std::vector<JointAction> actions;

  int horizon() const { return static_cast<int>(states.size()); }
};

struct DemonstrationSet {
  std::vector<Trajectory> trajectories;
  std::string game_id;
  int num_agents = 0;
  int num_states = 0;
  int horizon = 0;
  std::uint64_t seed = 0;

  int num_episodes() const { return static_cast<int>(trajectories.size()); }
};

/**
 * Reward-free view of a game. Training code that must not observe true
 * rewards takes this type; it exposes dynamics, the initial distribution and
 * observation maps but has no reward member at all.
 */
struct GameDynamics {
  int num_agents = 0;
  int num_states = 0;
  std::vector<int> action_counts;
  const std::vector<std::vector<TransitionRow>>* transition = nullptr;
  const std::vector<double>* initial_dist = nullptr;
  double discount = 0.9;
  ObservationMap obs;
  std::string game_id;

  int num_joint_actions() const {
    int n = 1;
    for (int a : action_counts) n *= a;
    return n;
  }
  int encode_action(std::span<const int> action) const {
    int idx = 0, stride = 1;
    for (int i = 0; i < num_agents; ++i) {
      idx += action[i] * stride;
      stride *= action_counts[i];
    }
    return idx;
  }
  JointAction decode_action(int idx) const {
    JointAction a(num_agents);
    for (int i = 0; i < num_agents; ++i) {
      a[i] = idx % action_counts[i];
      idx /= action_counts[i];
    }
    return a;
  }
  int encode_other_action(std::span<const int> action, int agent) const {
    int idx = 0, stride = 1;
    for (int i = 0; i < num_agents; ++i) {
      if (i == agent) continue;
      idx += action[i] * stride;
      stride *= action_counts[i];
    }
    return idx;
  }
  int num_other_actions(int agent) const {
    int n = 1;
    for (int i = 0; i < num_agents; ++i)
      if (i != agent) n *= action_counts[i];
    return n;
  }
};

inline GameDynamics strip_rewards(const MarkovGame& g, const ObservationMap& obs) {
  GameDynamics d;
  d.num_agents = g.num_agents;
  d.num_states = g.num_states;
  d.action_counts = g.action_counts;
  d.transition = &g.transition;
  d.initial_dist = &g.initial_dist;
  d.discount = g.discount;
  d.obs = obs;
  d.game_id = g.id;
  return d;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string field;
  std::string where;
  double magnitude = 0.0;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks every structural invariant of the game; report-valued, never throws.
inline ValidationReport validate_game(const MarkovGame& g) {
  ValidationReport rep;
  auto add = [&](const std::string& field, const std::string& where, double mag) {
    rep.violations.push_back({field, where, mag});
  };

  if (g.num_agents <= 0) add("num_agents", "", g.num_agents);
  if (g.num_states <= 0) add("num_states", "", g.num_states);
  if (static_cast<int>(g.action_counts.size()) != g.num_agents)
    add("action_counts", "size", static_cast<double>(g.action_counts.size()));
  for (std::size_t i = 0; i < g.action_counts.size(); ++i)
    if (g.action_counts[i] <= 0)
      add("action_counts", "agent " + std::to_string(i), g.action_counts[i]);
  if (!(g.discount >= 0.0 && g.discount < 1.0)) add("discount", "", g.discount);
  if (!rep.ok()) return rep;  // dimensions unusable, stop here

  const int ja_count = g.num_joint_actions();
  if (static_cast<int>(g.transition.size()) != g.num_states) {
    add("transition", "row count", static_cast<double>(g.transition.size()));
    return rep;
  }
  for (int s = 0; s < g.num_states; ++s) {
    if (static_cast<int>(g.transition[s].size()) != ja_count) {
      add("transition", "state " + std::to_string(s), static_cast<double>(g.transition[s].size()));
      continue;
    }
    for (int ja = 0; ja < ja_count; ++ja) {
      double sum = 0.0;
      for (const auto& e : g.transition[s][ja]) {
        if (e.prob < 0.0)
          add("transition", "state " + std::to_string(s) + " action " + std::to_string(ja),
              e.prob);
        if (e.state < 0 || e.state >= g.num_states)
          add("transition", "state " + std::to_string(s) + " action " + std::to_string(ja),
              e.state);
        sum += e.prob;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        add("transition", "state " + std::to_string(s) + " action " + std::to_string(ja), sum);
    }
  }

  if (static_cast<int>(g.rewards.size()) != g.num_agents) {
    add("rewards", "agent count", static_cast<double>(g.rewards.size()));
    return rep;
  }
  for (int i = 0; i < g.num_agents; ++i) {
    if (static_cast<int>(g.rewards[i].size()) != g.num_states) {
      add("rewards", "agent " + std::to_string(i), static_cast<double>(g.rewards[i].size()));
      continue;
    }
    for (int s = 0; s < g.num_states; ++s) {
      if (static_cast<int>(g.rewards[i][s].size()) != ja_count) {
        add("rewards", "agent " + std::to_string(i) + " state " + std::to_string(s),
            static_cast<double>(g.rewards[i][s].size()));
        continue;
      }
      for (int ja = 0; ja < ja_count; ++ja) {
        double r = g.rewards[i][s][ja];
        if (!std::isfinite(r) || std::abs(r) > g.reward_bound)
          add("rewards",
              "agent " + std::to_string(i) + " state " + std::to_string(s) + " action " +
                  std::to_string(ja),
              r);
      }
    }
  }

  if (static_cast<int>(g.initial_dist.size()) != g.num_states) {
    add("initial_dist", "size", static_cast<double>(g.initial_dist.size()));
  } else {
    double sum = 0.0;
    for (int s = 0; s < g.num_states; ++s) {
      if (g.initial_dist[s] < 0.0) add("initial_dist", "state " + std::to_string(s), g.initial_dist[s]);
      sum += g.initial_dist[s];
    }
    if (std::abs(sum - 1.0) > 1e-12) add("initial_dist", "sum", sum);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Policies and sampling
// ---------------------------------------------------------------------------

/// Probability of the joint action under the product policy.
inline double joint_policy_prob(const JointPolicy& pi, int state, std::span<const int> action) {
  if (state < 0 || static_cast<std::size_t>(state) >= pi.obs.state_to_obs[0].size())
    throw std::out_of_range("joint_policy_prob: state index");
  double p = 1.0;
  for (int i = 0; i < pi.num_agents(); ++i) {
    const auto& row = pi.agents[i].probs[pi.obs.obs(i, state)];
    if (action[i] < 0 || static_cast<std::size_t>(action[i]) >= row.size())
      throw std::out_of_range("joint_policy_prob: action index");
    p *= row[action[i]];
  }
  return p;
}

inline int sample_categorical_row(const TransitionRow& row, Rng& rng) {
  double u = rng.uniform01();
  double acc = 0.0;
  for (const auto& e : row) {
    acc += e.prob;
    if (u < acc) return e.state;
  }
  return row.empty() ? 0 : row.back().state;
}

/// Rolls out `horizon` steps: s0 ~ eta, each agent samples independently.
inline Trajectory sample_trajectory(const GameDynamics& d, const JointPolicy& pi, int horizon,
                                    Rng& rng) {
  Trajectory traj;
  traj.states.reserve(horizon);
  traj.actions.reserve(horizon);
  int s = rng.categorical(*d.initial_dist);
  for (int t = 0; t < horizon; ++t) {
    JointAction a(d.num_agents);
    for (int i = 0; i < d.num_agents; ++i) {
      const auto& row = pi.agents[i].probs[pi.obs.obs(i, s)];
      a[i] = rng.categorical(row);
    }
    traj.states.push_back(s);
    traj.actions.push_back(a);
    int ja = d.encode_action(a);
    s = sample_categorical_row((*d.transition)[s][ja], rng);
  }
  return traj;
}

inline Trajectory sample_trajectory(const MarkovGame& g, const JointPolicy& pi, int horizon,
                                    Rng& rng) {
  ValidationReport rep = validate_game(g);
  if (!rep.ok()) throw std::invalid_argument("sample_trajectory: invalid game: " + rep.violations[0].field);
  GameDynamics d = strip_rewards(g, pi.obs);
  return sample_trajectory(d, pi, horizon, rng);
}

inline DemonstrationSet collect_demonstrations(const MarkovGame& g, const JointPolicy& expert,
                                               int episodes, int horizon, const RngConfig& rng_cfg) {
  ValidationReport rep = validate_game(g);
  if (!rep.ok())
    throw std::invalid_argument("collect_demonstrations: invalid game: " + rep.violations[0].field);
  if (episodes < 1) throw std::invalid_argument("collect_demonstrations: episodes must be >= 1");
  DemonstrationSet demos;
  demos.game_id = g.id;
  demos.num_agents = g.num_agents;
  demos.num_states = g.num_states;
  demos.horizon = horizon;
  demos.seed = rng_cfg.seed;
  GameDynamics d = strip_rewards(g, expert.obs);
  Rng rng(rng_cfg);
  for (int e = 0; e < episodes; ++e)
    demos.trajectories.push_back(sample_trajectory(d, expert, horizon, rng));
  return demos;
}

/// Joint policy taking agent `agent` from `deviating` and the rest from `base`.
inline JointPolicy compose_policy(const JointPolicy& deviating, const JointPolicy& base, int agent) {
  if (deviating.num_agents() != base.num_agents())
    throw std::invalid_argument("compose_policy: agent count mismatch");
  if (agent < 0 || agent >= base.num_agents())
    throw std::out_of_range("compose_policy: agent index");
  JointPolicy out = base;
  out.agents[agent] = deviating.agents[agent];
  out.obs.observation_counts[agent] = deviating.obs.observation_counts[agent];
  out.obs.state_to_obs[agent] = deviating.obs.state_to_obs[agent];
  return out;
}

}  // namespace magail
