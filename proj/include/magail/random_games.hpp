#pragma once

#include <cmath>
#include <vector>

#include "magail/game.hpp"
#include "magail/rng.hpp"

namespace magail {

/// Random probability vector (normalized exponentials, all entries positive).
inline std::vector<double> random_simplex(int n, Rng& rng) {
  std::vector<double> v(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    v[i] = -std::log(1.0 - rng.uniform01());
    sum += v[i];
  }
  for (int i = 0; i < n; ++i) v[i] /= sum;
  return v;
}

/// Dense random game with rewards in [-1, 1] and full-support dynamics.
inline MarkovGame random_game(int num_agents, int num_states, const std::vector<int>& actions,
                              double discount, Rng& rng) {
  MarkovGame g;
  g.num_agents = num_agents;
  g.num_states = num_states;
  g.action_counts = actions;
  g.discount = discount;
  g.reward_bound = 1.0;
  g.id = "random";
  const int ja_count = g.num_joint_actions();
  g.transition.assign(num_states, std::vector<TransitionRow>(ja_count));
  for (int s = 0; s < num_states; ++s)
    for (int ja = 0; ja < ja_count; ++ja) {
      std::vector<double> row = random_simplex(num_states, rng);
      for (int s2 = 0; s2 < num_states; ++s2) g.transition[s][ja].push_back({s2, row[s2]});
    }
  g.rewards.assign(num_agents, {});
  for (int i = 0; i < num_agents; ++i) {
    g.rewards[i].assign(num_states, std::vector<double>(ja_count));
    for (int s = 0; s < num_states; ++s)
      for (int ja = 0; ja < ja_count; ++ja) g.rewards[i][s][ja] = rng.uniform(-1.0, 1.0);
  }
  g.initial_dist = random_simplex(num_states, rng);
  return g;
}

/// Random game with dimensions drawn inside the given caps.
inline MarkovGame random_game_capped(int max_agents, int max_states, int max_actions,
                                     double discount, Rng& rng) {
  int n = 1 + rng.uniform_int(max_agents);
  int s = 1 + rng.uniform_int(max_states);
  std::vector<int> actions(n);
  for (int i = 0; i < n; ++i) actions[i] = 1 + rng.uniform_int(max_actions);
  return random_game(n, s, actions, discount, rng);
}

/// Random full-support product policy over the given observation map.
inline JointPolicy random_policy(const MarkovGame& g, const ObservationMap& obs, Rng& rng) {
  JointPolicy pi;
  pi.obs = obs;
  for (int i = 0; i < g.num_agents; ++i) {
    AgentPolicy ap;
    for (int o = 0; o < obs.observation_counts[i]; ++o)
      ap.probs.push_back(random_simplex(g.action_counts[i], rng));
    pi.agents.push_back(std::move(ap));
  }
  return pi;
}

/// Mixes a policy's rows toward random noise: rows become
/// (1 - amount) * row + amount * random simplex point.
inline JointPolicy perturb_policy(const JointPolicy& pi, double amount, Rng& rng) {
  JointPolicy out = pi;
  for (auto& agent : out.agents)
    for (auto& row : agent.probs) {
      std::vector<double> noise = random_simplex(static_cast<int>(row.size()), rng);
      for (std::size_t a = 0; a < row.size(); ++a)
        row[a] = (1.0 - amount) * row[a] + amount * noise[a];
    }
  return out;
}

/// Perturbs a single agent's rows, leaving the others untouched.
inline JointPolicy perturb_agent_policy(const JointPolicy& pi, int agent, double amount, Rng& rng) {
  JointPolicy out = pi;
  for (auto& row : out.agents[agent].probs) {
    std::vector<double> noise = random_simplex(static_cast<int>(row.size()), rng);
    for (std::size_t a = 0; a < row.size(); ++a)
      row[a] = (1.0 - amount) * row[a] + amount * noise[a];
  }
  return out;
}

/// Random policy sharpened toward its largest entries: rows proportional to
/// u^kappa for a random simplex point u. Large kappa concentrates visitation.
inline JointPolicy peaked_random_policy(const MarkovGame& g, const ObservationMap& obs,
                                        double kappa, Rng& rng) {
  JointPolicy pi = random_policy(g, obs, rng);
  for (auto& agent : pi.agents)
    for (auto& row : agent.probs) {
      double sum = 0.0;
      for (double& p : row) {
        p = std::pow(p, kappa);
        sum += p;
      }
      for (double& p : row) p /= sum;
    }
  return pi;
}

/// Repeated matching pennies: one state, two agents, agent 0 wins +1 on a
/// match and -1 otherwise; agent 1 receives the negation.
inline MarkovGame make_matching_pennies(double discount) {
  MarkovGame g;
  g.id = "matching_pennies";
  g.num_agents = 2;
  g.num_states = 1;
  g.action_counts = {2, 2};
  g.discount = discount;
  g.reward_bound = 1.0;
  g.transition.assign(1, std::vector<TransitionRow>(4, {{0, 1.0}}));
  g.rewards.assign(2, {std::vector<double>(4)});
  for (int ja = 0; ja < 4; ++ja) {
    JointAction a = g.decode_action(ja);
    double r = a[0] == a[1] ? 1.0 : -1.0;
    g.rewards[0][0][ja] = r;
    g.rewards[1][0][ja] = -r;
  }
  g.initial_dist = {1.0};
  return g;
}

/// Random game whose agents share one reward table.
inline MarkovGame random_team_game(int num_agents, int num_states, const std::vector<int>& actions,
                                   double discount, Rng& rng) {
  MarkovGame g = random_game(num_agents, num_states, actions, discount, rng);
  for (int i = 1; i < num_agents; ++i) g.rewards[i] = g.rewards[0];
  g.id = "random_team";
  return g;
}

/// Random two-agent game with exactly opposite rewards.
inline MarkovGame random_zero_sum_game(int num_states, const std::vector<int>& actions,
                                       double discount, Rng& rng) {
  MarkovGame g = random_game(2, num_states, actions, discount, rng);
  for (int s = 0; s < num_states; ++s)
    for (int ja = 0; ja < g.num_joint_actions(); ++ja) g.rewards[1][s][ja] = -g.rewards[0][s][ja];
  g.id = "random_zero_sum";
  return g;
}

}  // namespace magail
