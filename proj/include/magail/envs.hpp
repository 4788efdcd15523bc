#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "magail/game.hpp"
#include "magail/rng.hpp"

namespace magail {

/// Parameters shared by the grid builders. Each builder reads the fields it
/// needs: `step_penalty` scales per-distance penalties, `num_landmarks` is the
/// landmark count (or obstacle count for predator-prey), and
/// `randomize_layout` folds sampled landmark placements into the state so the
/// game stays stationary.
struct GridSpec {
  int width = 3;
  int height = 3;
  int num_agents = 2;
  int num_landmarks = 3;
  double collision_penalty = 0.25;
  double step_penalty = 0.1;
  double goal_reward = 1.0;
  double discount = 0.9;
  bool randomize_layout = false;
  std::uint64_t layout_seed = 0;
  int layout_variants = 4;
  double predator_move_prob = 0.75;
};

struct BuiltGame {
  MarkovGame game;
  ObservationMap obs;
};

namespace detail {

constexpr long long kStateBudget = 50'000;

inline void check_state_budget(long long states, const std::string& tag) {
  if (states > kStateBudget)
    throw std::invalid_argument(tag + ": " + std::to_string(states) +
                                " states exceed the exact-solver budget");
}

inline double table_max_abs(const MarkovGame& g) {
  double m = 0.0;
  for (const auto& per_agent : g.rewards)
    for (const auto& row : per_agent)
      for (double r : row) m = std::max(m, std::abs(r));
  return std::max(m, 1e-9);
}

// Moves on a width x height grid: 0 stay, 1 up, 2 down, 3 left, 4 right.
inline int grid_move(int cell, int action, int width, int height,
                     const std::vector<bool>& blocked) {
  int x = cell % width, y = cell / width;
  int nx = x, ny = y;
  switch (action) {
    case 1: ny = std::max(0, y - 1); break;
    case 2: ny = std::min(height - 1, y + 1); break;
    case 3: nx = std::max(0, x - 1); break;
    case 4: nx = std::min(width - 1, x + 1); break;
    default: break;
  }
  int next = nx + ny * width;
  if (!blocked.empty() && blocked[next]) return cell;
  return next;
}

inline int manhattan(int a, int b, int width) {
  return std::abs(a % width - b % width) + std::abs(a / width - b / width);
}

/// Landmark cells spread evenly over the grid's cell range.
inline std::vector<int> spread_landmarks(int count, int cells) {
  std::vector<int> lm(count);
  for (int j = 0; j < count; ++j)
    lm[j] = count > 1 ? static_cast<int>(std::llround(static_cast<double>(j) * (cells - 1) /
                                                      (count - 1)))
                      : cells / 2;
  return lm;
}

}  // namespace detail

/**
 * Speaker-listener corridor. The speaker observes only the goal color and can
 * only emit one of `num_landmarks` message symbols; the listener observes its
 * own cell and the last message (never the goal) and moves left/stay/right.
 * Both share the reward: `goal_reward` while the listener stands on the
 * goal-colored landmark, minus `step_penalty` every step.
 *
 * States enumerate (listener cell, goal color, last message or none), so the
 * state count is cells * colors * (messages + 1).
 */
inline BuiltGame build_coop_comm(const GridSpec& spec) {
  const int width = spec.width;
  const int colors = spec.num_landmarks;
  if (width < 1 || colors < 1) throw std::invalid_argument("coop_comm: bad dimensions");
  const int num_states = width * colors * (colors + 1);
  detail::check_state_budget(num_states, "coop_comm");
  std::vector<int> landmark = detail::spread_landmarks(colors, width);

  auto encode = [&](int pos, int goal, int msg) { return pos + width * (goal + colors * msg); };

  MarkovGame g;
  g.id = "coop_comm";
  g.num_agents = 2;
  g.num_states = num_states;
  g.action_counts = {colors, 3};  // speaker messages, listener moves
  g.discount = spec.discount;
  const int ja_count = g.num_joint_actions();
  g.transition.assign(num_states, std::vector<TransitionRow>(ja_count));
  g.rewards.assign(2, std::vector<std::vector<double>>(num_states, std::vector<double>(ja_count)));
  g.initial_dist.assign(num_states, 0.0);

  for (int pos = 0; pos < width; ++pos)
    for (int goal = 0; goal < colors; ++goal)
      for (int msg = 0; msg <= colors; ++msg) {
        int s = encode(pos, goal, msg);
        double r = (pos == landmark[goal] ? spec.goal_reward : 0.0) - spec.step_penalty;
        for (int ja = 0; ja < ja_count; ++ja) {
          JointAction a = g.decode_action(ja);
          int said = a[0];
          int next_pos = std::clamp(pos + (a[1] - 1), 0, width - 1);
          g.transition[s][ja] = {{encode(next_pos, goal, said), 1.0}};
          g.rewards[0][s][ja] = r;
          g.rewards[1][s][ja] = r;
        }
      }
  // Episodes start with no message yet, uniformly over cells and goals.
  for (int pos = 0; pos < width; ++pos)
    for (int goal = 0; goal < colors; ++goal)
      g.initial_dist[encode(pos, goal, colors)] = 1.0 / (width * colors);
  g.reward_bound = detail::table_max_abs(g);

  ObservationMap obs;
  obs.observation_counts = {colors, width * (colors + 1)};
  obs.state_to_obs.assign(2, std::vector<int>(num_states));
  for (int pos = 0; pos < width; ++pos)
    for (int goal = 0; goal < colors; ++goal)
      for (int msg = 0; msg <= colors; ++msg) {
        int s = encode(pos, goal, msg);
        obs.state_to_obs[0][s] = goal;
        obs.state_to_obs[1][s] = pos + width * msg;
      }
  return {std::move(g), std::move(obs)};
}

/**
 * Cooperative navigation: `num_agents` agents on a grid share the reward
 * -step_penalty * sum over landmarks of the distance to the nearest agent,
 * minus `collision_penalty` per overlapping pair. Full-state observations.
 * With `randomize_layout`, `layout_variants` landmark placements drawn from
 * `layout_seed` become a state component sampled by the initial distribution.
 */
inline BuiltGame build_coop_nav(const GridSpec& spec) {
  const int cells = spec.width * spec.height;
  const int agents = spec.num_agents;
  if (agents < 1 || cells < 1 || spec.num_landmarks < 1)
    throw std::invalid_argument("coop_nav: bad dimensions");

  std::vector<std::vector<int>> layouts;
  if (spec.randomize_layout) {
    Rng rng(spec.layout_seed, "coop_nav.layout");
    for (int v = 0; v < spec.layout_variants; ++v) {
      std::vector<int> lm;
      while (static_cast<int>(lm.size()) < spec.num_landmarks) {
        int c = rng.uniform_int(cells);
        if (std::find(lm.begin(), lm.end(), c) == lm.end()) lm.push_back(c);
      }
      layouts.push_back(std::move(lm));
    }
  } else {
    layouts.push_back(detail::spread_landmarks(spec.num_landmarks, cells));
  }
  const int num_layouts = static_cast<int>(layouts.size());

  long long positions = 1;
  for (int i = 0; i < agents; ++i) positions *= cells;
  detail::check_state_budget(positions * num_layouts, "coop_nav");
  const int num_states = static_cast<int>(positions) * num_layouts;

  auto decode_state = [&](int s, std::vector<int>& pos, int& layout) {
    for (int i = 0; i < agents; ++i) {
      pos[i] = s % cells;
      s /= cells;
    }
    layout = s;
  };
  auto encode_state = [&](const std::vector<int>& pos, int layout) {
    int s = layout;
    for (int i = agents - 1; i >= 0; --i) s = s * cells + pos[i];
    return s;
  };

  MarkovGame g;
  g.id = "coop_nav";
  g.num_agents = agents;
  g.num_states = num_states;
  g.action_counts.assign(agents, 5);
  g.discount = spec.discount;
  const int ja_count = g.num_joint_actions();
  g.transition.assign(num_states, std::vector<TransitionRow>(ja_count));
  g.rewards.assign(agents,
                   std::vector<std::vector<double>>(num_states, std::vector<double>(ja_count)));
  g.initial_dist.assign(num_states, 1.0 / num_states);

  std::vector<bool> no_blocks;
  std::vector<int> pos(agents), next(agents);
  for (int s = 0; s < num_states; ++s) {
    int layout = 0;
    decode_state(s, pos, layout);
    double r = 0.0;
    for (int lm : layouts[layout]) {
      int best = detail::manhattan(pos[0], lm, spec.width);
      for (int i = 1; i < agents; ++i)
        best = std::min(best, detail::manhattan(pos[i], lm, spec.width));
      r -= spec.step_penalty * best;
    }
    for (int i = 0; i < agents; ++i)
      for (int j = i + 1; j < agents; ++j)
        if (pos[i] == pos[j]) r -= spec.collision_penalty;
    for (int ja = 0; ja < ja_count; ++ja) {
      JointAction a = g.decode_action(ja);
      for (int i = 0; i < agents; ++i)
        next[i] = detail::grid_move(pos[i], a[i], spec.width, spec.height, no_blocks);
      g.transition[s][ja] = {{encode_state(next, layout), 1.0}};
      for (int i = 0; i < agents; ++i) g.rewards[i][s][ja] = r;
    }
  }
  g.reward_bound = detail::table_max_abs(g);

  ObservationMap obs = ObservationMap::identity(agents, num_states);
  return {std::move(g), std::move(obs)};
}

/**
 * Keep-away corridor: agent 0 walks toward one of the two end-cell targets,
 * the adversary (agent 1) blocks it; colliding moves are reverted so contact
 * pushes agent 0 back. Agent 0 earns `goal_reward` on the target minus
 * `step_penalty` per cell of distance; the adversary receives the exact
 * negation. The adversary's observation hides which end is the target.
 */
inline BuiltGame build_keep_away(const GridSpec& spec) {
  const int width = spec.width;
  if (width < 2) throw std::invalid_argument("keep_away: corridor too short");
  const int num_states = width * width * 2;
  detail::check_state_budget(num_states, "keep_away");

  auto encode = [&](int a_pos, int v_pos, int target) {
    return a_pos + width * (v_pos + width * target);
  };

  MarkovGame g;
  g.id = "keep_away";
  g.num_agents = 2;
  g.num_states = num_states;
  g.action_counts = {3, 3};  // left, stay, right
  g.discount = spec.discount;
  const int ja_count = g.num_joint_actions();
  g.transition.assign(num_states, std::vector<TransitionRow>(ja_count));
  g.rewards.assign(2, std::vector<std::vector<double>>(num_states, std::vector<double>(ja_count)));
  g.initial_dist.assign(num_states, 0.0);

  for (int a_pos = 0; a_pos < width; ++a_pos)
    for (int v_pos = 0; v_pos < width; ++v_pos)
      for (int target = 0; target < 2; ++target) {
        int s = encode(a_pos, v_pos, target);
        int target_cell = target == 0 ? 0 : width - 1;
        double r1 = (a_pos == target_cell ? spec.goal_reward : 0.0) -
                    spec.step_penalty * std::abs(a_pos - target_cell);
        for (int ja = 0; ja < ja_count; ++ja) {
          JointAction act = g.decode_action(ja);
          int na = std::clamp(a_pos + (act[0] - 1), 0, width - 1);
          int nv = std::clamp(v_pos + (act[1] - 1), 0, width - 1);
          bool collide = (na == nv) || (na == v_pos && nv == a_pos);
          if (collide) {
            na = a_pos;
            nv = v_pos;
          }
          g.transition[s][ja] = {{encode(na, nv, target), 1.0}};
          g.rewards[0][s][ja] = r1;
          g.rewards[1][s][ja] = -r1;
        }
      }
  // Uniform start over distinct positions and both targets.
  int starts = 0;
  for (int a_pos = 0; a_pos < width; ++a_pos)
    for (int v_pos = 0; v_pos < width; ++v_pos)
      if (a_pos != v_pos) starts += 2;
  for (int a_pos = 0; a_pos < width; ++a_pos)
    for (int v_pos = 0; v_pos < width; ++v_pos)
      if (a_pos != v_pos)
        for (int target = 0; target < 2; ++target)
          g.initial_dist[encode(a_pos, v_pos, target)] = 1.0 / starts;
  g.reward_bound = detail::table_max_abs(g);

  ObservationMap obs;
  obs.observation_counts = {num_states, width * width};
  obs.state_to_obs.assign(2, std::vector<int>(num_states));
  for (int a_pos = 0; a_pos < width; ++a_pos)
    for (int v_pos = 0; v_pos < width; ++v_pos)
      for (int target = 0; target < 2; ++target) {
        int s = encode(a_pos, v_pos, target);
        obs.state_to_obs[0][s] = s;
        obs.state_to_obs[1][s] = a_pos + width * v_pos;  // target hidden
      }
  return {std::move(g), std::move(obs)};
}

/**
 * Predator-prey: `num_agents` predators chase one prey (the last agent). The
 * prey moves every step; each predator's move lands only with probability
 * `predator_move_prob`, the discrete stand-in for being slower. Any predator
 * sharing the prey's cell pays out `goal_reward` to every predator and
 * -goal_reward to the prey. `num_landmarks` static obstacle cells block
 * movement.
 */
inline BuiltGame build_predator_prey(const GridSpec& spec) {
  const int cells = spec.width * spec.height;
  const int predators = spec.num_agents;
  const int agents = predators + 1;
  if (predators < 1 || cells < 2) throw std::invalid_argument("predator_prey: bad dimensions");
  if (spec.predator_move_prob < 0.0 || spec.predator_move_prob > 1.0)
    throw std::invalid_argument("predator_prey: move probability out of range");

  std::vector<bool> blocked(cells, false);
  {
    // Obstacles at interior cells, deterministic order.
    int placed = 0;
    for (int c = 0; c < cells && placed < spec.num_landmarks; ++c) {
      int x = c % spec.width, y = c / spec.width;
      bool interior = x > 0 && x < spec.width - 1 && y > 0 && y < spec.height - 1;
      if (interior) {
        blocked[c] = true;
        ++placed;
      }
    }
  }

  long long states = 1;
  for (int i = 0; i < agents; ++i) states *= cells;
  detail::check_state_budget(states, "predator_prey");
  const int num_states = static_cast<int>(states);

  auto decode_state = [&](int s, std::vector<int>& pos) {
    for (int i = 0; i < agents; ++i) {
      pos[i] = s % cells;
      s /= cells;
    }
  };
  auto encode_state = [&](const std::vector<int>& pos) {
    int s = 0;
    for (int i = agents - 1; i >= 0; --i) s = s * cells + pos[i];
    return s;
  };

  MarkovGame g;
  g.id = "predator_prey";
  g.num_agents = agents;
  g.num_states = num_states;
  g.action_counts.assign(agents, 5);
  g.discount = spec.discount;
  const int ja_count = g.num_joint_actions();
  g.transition.assign(num_states, std::vector<TransitionRow>(ja_count));
  g.rewards.assign(agents,
                   std::vector<std::vector<double>>(num_states, std::vector<double>(ja_count)));
  g.initial_dist.assign(num_states, 0.0);

  const double p_move = spec.predator_move_prob;
  std::vector<int> pos(agents), moved(agents);
  for (int s = 0; s < num_states; ++s) {
    decode_state(s, pos);
    bool touch = false;
    for (int i = 0; i < predators; ++i)
      if (pos[i] == pos[predators]) touch = true;
    for (int ja = 0; ja < ja_count; ++ja) {
      JointAction a = g.decode_action(ja);
      for (int i = 0; i < agents; ++i)
        moved[i] = detail::grid_move(pos[i], a[i], spec.width, spec.height, blocked);
      // Each predator's move succeeds independently with p_move.
      TransitionRow row;
      for (int mask = 0; mask < (1 << predators); ++mask) {
        double prob = 1.0;
        std::vector<int> next(agents);
        for (int i = 0; i < predators; ++i) {
          bool moves = mask & (1 << i);
          prob *= moves ? p_move : (1.0 - p_move);
          next[i] = moves ? moved[i] : pos[i];
        }
        next[predators] = moved[predators];
        if (prob == 0.0) continue;
        int ns = encode_state(next);
        bool found = false;
        for (auto& e : row)
          if (e.state == ns) {
            e.prob += prob;
            found = true;
            break;
          }
        if (!found) row.push_back({ns, prob});
      }
      g.transition[s][ja] = std::move(row);
      for (int i = 0; i < predators; ++i) g.rewards[i][s][ja] = touch ? spec.goal_reward : 0.0;
      g.rewards[predators][s][ja] = touch ? -spec.goal_reward : 0.0;
    }
  }
  // Uniform start over unblocked positions.
  std::vector<int> free_cells;
  for (int c = 0; c < cells; ++c)
    if (!blocked[c]) free_cells.push_back(c);
  long long free_states = 1;
  for (int i = 0; i < agents; ++i) free_states *= free_cells.size();
  std::vector<int> idx(agents, 0);
  while (true) {
    for (int i = 0; i < agents; ++i) pos[i] = free_cells[idx[i]];
    g.initial_dist[encode_state(pos)] = 1.0 / free_states;
    int carry = 0;
    while (carry < agents && ++idx[carry] == static_cast<int>(free_cells.size())) {
      idx[carry] = 0;
      ++carry;
    }
    if (carry == agents) break;
  }
  g.reward_bound = detail::table_max_abs(g);

  ObservationMap obs = ObservationMap::identity(agents, num_states);
  return {std::move(g), std::move(obs)};
}

/**
 * Hand-built communicative expert for the speaker-listener corridor: the
 * speaker announces the goal color, the listener walks toward the announced
 * landmark and heads for the middle of the corridor while no message has
 * arrived. Observation-measurable by construction, which the joint planner's
 * expert is not (with a full-state listener every message is value-tied, so
 * planning collapses the channel).
 */
inline JointPolicy coop_comm_expert(const GridSpec& spec, const ObservationMap& obs) {
  const int width = spec.width;
  const int colors = spec.num_landmarks;
  std::vector<int> landmark = detail::spread_landmarks(colors, width);
  JointPolicy pi;
  pi.obs = obs;
  AgentPolicy speaker;
  speaker.probs.assign(colors, {});
  for (int goal = 0; goal < colors; ++goal) {
    std::vector<double> row(colors, 0.0);
    row[goal] = 1.0;
    speaker.probs[goal] = row;
  }
  AgentPolicy listener;
  listener.probs.assign(width * (colors + 1), {});
  const int center = width / 2;
  for (int msg = 0; msg <= colors; ++msg)
    for (int pos = 0; pos < width; ++pos) {
      int target = msg == colors ? center : landmark[msg];
      std::vector<double> row(3, 0.0);
      row[pos == target ? 1 : (pos < target ? 2 : 0)] = 1.0;
      listener.probs[pos + width * msg] = row;
    }
  pi.agents = {std::move(speaker), std::move(listener)};
  return pi;
}

inline BuiltGame build_env(const std::string& tag, const GridSpec& spec) {
  if (tag == "coop_comm") return build_coop_comm(spec);
  if (tag == "coop_nav") return build_coop_nav(spec);
  if (tag == "keep_away") return build_keep_away(spec);
  if (tag == "predator_prey") return build_predator_prey(spec);
  throw std::invalid_argument("unknown environment tag '" + tag + "'");
}

inline std::vector<std::string> env_tags() {
  return {"coop_comm", "coop_nav", "keep_away", "predator_prey"};
}

}  // namespace magail
