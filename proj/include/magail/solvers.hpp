#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "magail/game.hpp"

namespace magail {

/// Per-agent state values v[agent][state].
struct ValueTable {
  std::vector<std::vector<double>> v;
};

/// Per-agent action values q[agent][state][own action].
struct QTable {
  std::vector<std::vector<std::vector<double>>> q;
};

/// Discounted state-action visitation; total mass 1/(1-discount).
struct OccupancyTable {
  std::vector<std::vector<double>> rho;  // [state][joint action]
  std::vector<double> state_mass;        // row sums
  double discount = 0.0;

  double total_mass() const {
    double m = 0.0;
    for (double d : state_mass) m += d;
    return m;
  }
  /// Marginal over one agent's actions: [state][a_i].
  std::vector<std::vector<double>> agent_marginal(const MarkovGame& g, int agent) const {
    std::vector<std::vector<double>> out(g.num_states,
                                         std::vector<double>(g.action_counts[agent], 0.0));
    const int ja_count = g.num_joint_actions();
    for (int s = 0; s < g.num_states; ++s)
      for (int ja = 0; ja < ja_count; ++ja) {
        JointAction a = g.decode_action(ja);
        out[s][a[agent]] += rho[s][ja];
      }
    return out;
  }
};

class BudgetError : public std::runtime_error {
 public:
  explicit BudgetError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

/// Joint action probabilities per state: table[s][ja].
inline std::vector<std::vector<double>> joint_prob_table(const MarkovGame& g,
                                                         const JointPolicy& pi) {
  const int ja_count = g.num_joint_actions();
  std::vector<std::vector<double>> table(g.num_states, std::vector<double>(ja_count, 1.0));
  for (int s = 0; s < g.num_states; ++s) {
    for (int ja = 0; ja < ja_count; ++ja) {
      int idx = ja;
      double p = 1.0;
      for (int i = 0; i < g.num_agents; ++i) {
        int ai = idx % g.action_counts[i];
        idx /= g.action_counts[i];
        p *= pi.agent_prob(i, s, ai);
      }
      table[s][ja] = p;
    }
  }
  return table;
}

/// State transition matrix under the policy: P(s, s') row-stochastic.
inline Eigen::MatrixXd policy_transition_matrix(const MarkovGame& g,
                                                const std::vector<std::vector<double>>& joint_prob) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(g.num_states, g.num_states);
  const int ja_count = g.num_joint_actions();
  for (int s = 0; s < g.num_states; ++s)
    for (int ja = 0; ja < ja_count; ++ja) {
      double w = joint_prob[s][ja];
      if (w == 0.0) continue;
      for (const auto& e : g.transition[s][ja]) P(s, e.state) += w * e.prob;
    }
  return P;
}

inline double expected_next_value(const MarkovGame& g, int s, int ja,
                                  const std::vector<double>& v) {
  double ev = 0.0;
  for (const auto& e : g.transition[s][ja]) ev += e.prob * v[e.state];
  return ev;
}

}  // namespace detail

/**
 * Solves the per-agent Bellman equations
 *   v_i(s) = E_pi[ r_i(s, a) + discount * sum_s' T(s'|s, a) v_i(s')]
 * by one dense LU factorization shared across agents. The linear-system
 * residual is checked to 1e-10 in max norm.
 */
inline ValueTable bellman_values(const MarkovGame& g, const JointPolicy& pi) {
  const auto joint_prob = detail::joint_prob_table(g, pi);
  Eigen::MatrixXd P = detail::policy_transition_matrix(g, joint_prob);
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(g.num_states, g.num_states) - g.discount * P;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);

  const int ja_count = g.num_joint_actions();
  ValueTable out;
  out.v.resize(g.num_agents);
  for (int i = 0; i < g.num_agents; ++i) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(g.num_states);
    for (int s = 0; s < g.num_states; ++s)
      for (int ja = 0; ja < ja_count; ++ja) r(s) += joint_prob[s][ja] * g.rewards[i][s][ja];
    Eigen::VectorXd v = lu.solve(r);
    double residual = (A * v - r).cwiseAbs().maxCoeff();
    if (residual > 1e-10)
      throw std::runtime_error("bellman_values: linear solve residual " + std::to_string(residual));
    out.v[i].assign(v.data(), v.data() + g.num_states);
  }
  return out;
}

/**
 * Action values against the other agents' policy:
 *   q_i(s, a_i) = E_{pi_{-i}}[ r_i(s, a) + discount * sum_s' T(s'|s, a) v_i(s')].
 */
inline QTable q_values(const MarkovGame& g, const JointPolicy& pi, const ValueTable& values) {
  if (static_cast<int>(values.v.size()) != g.num_agents)
    throw std::invalid_argument("q_values: value table agent count mismatch");
  const int ja_count = g.num_joint_actions();
  QTable out;
  out.q.resize(g.num_agents);
  for (int i = 0; i < g.num_agents; ++i) {
    out.q[i].assign(g.num_states, std::vector<double>(g.action_counts[i], 0.0));
    for (int s = 0; s < g.num_states; ++s) {
      for (int ja = 0; ja < ja_count; ++ja) {
        JointAction a = g.decode_action(ja);
        double w = 1.0;
        for (int j = 0; j < g.num_agents; ++j) {
          if (j == i) continue;
          w *= pi.agent_prob(j, s, a[j]);
        }
        if (w == 0.0) continue;
        double target = g.rewards[i][s][ja] +
                        g.discount * detail::expected_next_value(g, s, ja, values.v[i]);
        out.q[i][s][a[i]] += w * target;
      }
    }
  }
  return out;
}

/**
 * Objective of the equilibrium program: sum over agents and states of
 * v_i(s) - E_{a_i ~ pi_i} q_i(s, a_i). Identically zero when v solves the
 * Bellman equations, so the returned value is a pure numerical residual.
 */
inline double nash_residual(const MarkovGame& g, const JointPolicy& pi) {
  ValueTable values = bellman_values(g, pi);
  QTable q = q_values(g, pi, values);
  double total = 0.0;
  for (int i = 0; i < g.num_agents; ++i)
    for (int s = 0; s < g.num_states; ++s) {
      double eq = 0.0;
      for (int ai = 0; ai < g.action_counts[i]; ++ai)
        eq += pi.agent_prob(i, s, ai) * q.q[i][s][ai];
      total += values.v[i][s] - eq;
    }
  return total;
}

struct NashWitness {
  int agent = 0;
  int state = 0;
  int action = 0;
};

struct NashCheckResult {
  bool is_nash = false;
  double max_violation = 0.0;  // max over (i, s, a_i) of q_i - v_i; negative when slack
  std::optional<NashWitness> witness;
};

/**
 * One-step equilibrium test: the policy is an equilibrium iff
 * v_i(s) >= q_i(s, a_i) - tol for every agent, state and own action.
 * The worst constraint is reported as a witness when violated.
 */
inline NashCheckResult nash_check(const MarkovGame& g, const JointPolicy& pi, double tol) {
  if (tol <= 0.0) throw std::invalid_argument("nash_check: tol must be positive");
  ValueTable values = bellman_values(g, pi);
  QTable q = q_values(g, pi, values);
  NashCheckResult res;
  res.max_violation = -std::numeric_limits<double>::infinity();
  NashWitness worst;
  for (int i = 0; i < g.num_agents; ++i)
    for (int s = 0; s < g.num_states; ++s)
      for (int ai = 0; ai < g.action_counts[i]; ++ai) {
        double gap = q.q[i][s][ai] - values.v[i][s];
        if (gap > res.max_violation) {
          res.max_violation = gap;
          worst = {i, s, ai};
        }
      }
  res.is_nash = res.max_violation <= tol;
  if (!res.is_nash) res.witness = worst;
  return res;
}

// ---------------------------------------------------------------------------
// Unrolled (t-step) constraints
// ---------------------------------------------------------------------------

/// Length-t prefix for one agent: (state, own action) pairs in time order.
struct AgentPrefix {
  int agent = 0;
  std::vector<std::pair<int, int>> steps;  // (state, a_i)

  int length() const { return static_cast<int>(steps.size()); }
};

struct TstepValue {
  double value = 0.0;
  /// True when some step of the prefix is unreachable (no other-agent action
  /// produces the recorded successor); such steps contribute zero weight.
  bool zero_probability_prefix = false;
};

/**
 * Conditional t-step return for the prefix: rewards along the prefix are
 * averaged over the other agents' actions reweighted by transition
 * consistency, and the final pair is scored with the one-step q value. With a
 * single-pair prefix this reduces exactly to q_i(s, a_i).
 */
inline TstepValue tstep_q(const MarkovGame& g, const JointPolicy& pi, const AgentPrefix& prefix) {
  if (prefix.length() < 1) throw std::invalid_argument("tstep_q: empty prefix");
  const int i = prefix.agent;
  if (i < 0 || i >= g.num_agents) throw std::out_of_range("tstep_q: agent index");
  for (auto [s, ai] : prefix.steps) {
    if (s < 0 || s >= g.num_states) throw std::out_of_range("tstep_q: state index");
    if (ai < 0 || ai >= g.action_counts[i]) throw std::out_of_range("tstep_q: action index");
  }

  ValueTable values = bellman_values(g, pi);
  QTable q = q_values(g, pi, values);

  TstepValue out;
  const int L = prefix.length();
  const int other_count = g.num_other_actions(i);
  double discount_pow = 1.0;
  for (int j = 0; j + 1 < L; ++j) {
    auto [s, ai] = prefix.steps[j];
    int s_next = prefix.steps[j + 1].first;
    // E[r_i | step j of the prefix realized]: weight each a_{-i} by
    // pi_{-i}(a_{-i}|s) * T(s_next | s, (a_i, a_{-i})) and normalize.
    double z = 0.0, acc = 0.0;
    for (int o = 0; o < other_count; ++o) {
      JointAction a(g.num_agents);
      int idx = o;
      double w = 1.0;
      for (int k = 0; k < g.num_agents; ++k) {
        if (k == i) {
          a[k] = ai;
          continue;
        }
        a[k] = idx % g.action_counts[k];
        idx /= g.action_counts[k];
        w *= pi.agent_prob(k, s, a[k]);
      }
      if (w == 0.0) continue;
      int ja = g.encode_action(a);
      double t_prob = 0.0;
      for (const auto& e : g.transition[s][ja])
        if (e.state == s_next) t_prob += e.prob;
      w *= t_prob;
      if (w == 0.0) continue;
      z += w;
      acc += w * g.rewards[i][s][ja];
    }
    if (z == 0.0) {
      out.zero_probability_prefix = true;
    } else {
      out.value += discount_pow * acc / z;
    }
    discount_pow *= g.discount;
  }
  auto [s_last, a_last] = prefix.steps[L - 1];
  out.value += discount_pow * q.q[i][s_last][a_last];
  return out;
}

/// Open-loop deviation plan for one agent: a start state and a fixed action
/// sequence played regardless of the states encountered.
struct OpenLoopPrefix {
  int agent = 0;
  int initial_state = 0;
  std::vector<int> actions;
};

struct TstepCheckResult {
  bool is_nash = false;
  double max_violation = 0.0;
  std::optional<OpenLoopPrefix> witness;
};

/// Number of length-t open-loop plans for one agent, saturating at overflow.
inline long long prefix_space_size(const MarkovGame& g, int agent, int t) {
  long long n = g.num_states;
  for (int j = 0; j < t; ++j) {
    n *= g.action_counts[agent];
    if (n > (1LL << 60)) return 1LL << 60;
  }
  return n;
}

/// Value of playing the fixed action sequence from the given state while the
/// other agents follow pi, with the final action scored by the one-step q.
/// Intermediate states are averaged over the induced chain, so this is the
/// return of an open-loop deviation; with one action it is q_i(s, a).
inline double open_loop_q(const MarkovGame& g, const JointPolicy& pi, const QTable& q,
                          const OpenLoopPrefix& plan) {
  const int i = plan.agent;
  const int L = static_cast<int>(plan.actions.size());
  const int other_count = g.num_other_actions(i);
  std::vector<double> dist(g.num_states, 0.0);
  dist[plan.initial_state] = 1.0;
  double total = 0.0, discount_pow = 1.0;
  for (int j = 0; j + 1 < L; ++j) {
    std::vector<double> next(g.num_states, 0.0);
    for (int s = 0; s < g.num_states; ++s) {
      if (dist[s] == 0.0) continue;
      for (int o = 0; o < other_count; ++o) {
        JointAction a(g.num_agents);
        int idx = o;
        double w = dist[s];
        for (int k = 0; k < g.num_agents; ++k) {
          if (k == i) {
            a[k] = plan.actions[j];
            continue;
          }
          a[k] = idx % g.action_counts[k];
          idx /= g.action_counts[k];
          w *= pi.agent_prob(k, s, a[k]);
        }
        if (w == 0.0) continue;
        int ja = g.encode_action(a);
        total += discount_pow * w * g.rewards[i][s][ja];
        for (const auto& e : g.transition[s][ja]) next[e.state] += w * e.prob;
      }
    }
    dist.swap(next);
    discount_pow *= g.discount;
  }
  for (int s = 0; s < g.num_states; ++s)
    if (dist[s] != 0.0) total += discount_pow * dist[s] * q.q[i][s][plan.actions[L - 1]];
  return total;
}

/**
 * Exhaustive t-step equilibrium test: v_i(s0) >= Q of every length-t
 * open-loop deviation, for every agent and start state. Equivalent to the
 * one-step test at every depth (the t-step family averages back to the
 * one-step constraints under pi_i). Refuses, rather than subsamples, when the
 * enumeration exceeds the budget.
 */
inline TstepCheckResult tstep_nash_check(const MarkovGame& g, const JointPolicy& pi, int t,
                                         double tol, long long budget = 10'000'000) {
  if (t < 1) throw std::invalid_argument("tstep_nash_check: t must be >= 1");
  long long total = 0;
  for (int i = 0; i < g.num_agents; ++i) total += prefix_space_size(g, i, t);
  if (total > budget)
    throw BudgetError("tstep_nash_check: " + std::to_string(total) + " prefixes exceed budget " +
                      std::to_string(budget));

  ValueTable values = bellman_values(g, pi);
  QTable q = q_values(g, pi, values);

  TstepCheckResult res;
  res.max_violation = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < g.num_agents; ++i) {
    OpenLoopPrefix plan;
    plan.agent = i;
    plan.actions.assign(t, 0);
    long long action_seqs = 1;
    for (int j = 0; j < t; ++j) action_seqs *= g.action_counts[i];
    for (int s0 = 0; s0 < g.num_states; ++s0) {
      plan.initial_state = s0;
      for (long long code = 0; code < action_seqs; ++code) {
        long long c = code;
        for (int j = 0; j < t; ++j) {
          plan.actions[j] = static_cast<int>(c % g.action_counts[i]);
          c /= g.action_counts[i];
        }
        double gap = open_loop_q(g, pi, q, plan) - values.v[i][s0];
        if (gap > res.max_violation) {
          res.max_violation = gap;
          res.witness = plan;
        }
      }
    }
  }
  res.is_nash = res.max_violation <= tol;
  if (res.is_nash) res.witness.reset();
  return res;
}

// ---------------------------------------------------------------------------
// Dual weights and the Lagrangian dual value
// ---------------------------------------------------------------------------

/// Path weights over one agent's length-t trajectories (t+1 pairs), built from
/// the mixed process (pi_i, pi*_{-i}); they sum to one.
struct DualWeights {
  int agent = 0;
  int t = 0;
  std::vector<std::pair<AgentPrefix, double>> entries;

  double total() const {
    double s = 0.0;
    for (const auto& [p, w] : entries) s += w;
    return s;
  }
};

/**
 * Trajectory weights
 *   lambda(tau_i) = eta(s0) pi_i(a0|s0) prod_{j=1..t} pi_i(aj|sj) *
 *                   sum_{a_{-i}} T(sj | s_{j-1}, a) pi*_{-i}(a_{-i}|s_{j-1}),
 * the probability of generating tau_i when agent i plays pi_i and the others
 * play pi*. With t = 0 this degenerates to eta(s) pi_i(a_i|s).
 */
inline long long trajectory_space_size(const MarkovGame& g, int agent, int pairs) {
  long long n = 1;
  for (int j = 0; j < pairs; ++j) {
    n *= static_cast<long long>(g.num_states) * g.action_counts[agent];
    if (n > (1LL << 60)) return 1LL << 60;
  }
  return n;
}

inline DualWeights build_dual_weights(const MarkovGame& g, const JointPolicy& pi,
                                      const JointPolicy& pi_star, int agent, int t,
                                      long long budget = 10'000'000) {
  if (t < 0) throw std::invalid_argument("build_dual_weights: t must be >= 0");
  long long count = trajectory_space_size(g, agent, t + 1);
  if (count > budget)
    throw BudgetError("build_dual_weights: " + std::to_string(count) +
                      " trajectories exceed budget " + std::to_string(budget));

  // Other-agent-averaged transition under pi*: M(s, s') for each own action.
  // M[s][a_i][s'] = sum_{a_{-i}} pi*_{-i}(a_{-i}|s) T(s'|s, (a_i, a_{-i})).
  const int i = agent;
  const int other_count = g.num_other_actions(i);
  std::vector<std::vector<std::vector<double>>> mixed(
      g.num_states,
      std::vector<std::vector<double>>(g.action_counts[i], std::vector<double>(g.num_states, 0.0)));
  for (int s = 0; s < g.num_states; ++s)
    for (int ai = 0; ai < g.action_counts[i]; ++ai)
      for (int o = 0; o < other_count; ++o) {
        JointAction a(g.num_agents);
        int idx = o;
        double w = 1.0;
        for (int k = 0; k < g.num_agents; ++k) {
          if (k == i) {
            a[k] = ai;
            continue;
          }
          a[k] = idx % g.action_counts[k];
          idx /= g.action_counts[k];
          w *= pi_star.agent_prob(k, s, a[k]);
        }
        if (w == 0.0) continue;
        int ja = g.encode_action(a);
        for (const auto& e : g.transition[s][ja]) mixed[s][ai][e.state] += w * e.prob;
      }

  DualWeights out;
  out.agent = agent;
  out.t = t;
  out.entries.reserve(static_cast<std::size_t>(count));
  AgentPrefix prefix;
  prefix.agent = agent;
  prefix.steps.assign(t + 1, {0, 0});
  for (long long code = 0; code < count; ++code) {
    long long c = code;
    for (int j = 0; j <= t; ++j) {
      int s = static_cast<int>(c % g.num_states);
      c /= g.num_states;
      int a = static_cast<int>(c % g.action_counts[i]);
      c /= g.action_counts[i];
      prefix.steps[j] = {s, a};
    }
    double w = g.initial_dist[prefix.steps[0].first] *
               pi.agent_prob(i, prefix.steps[0].first, prefix.steps[0].second);
    for (int j = 1; j <= t && w > 0.0; ++j) {
      auto [s_prev, a_prev] = prefix.steps[j - 1];
      auto [s_cur, a_cur] = prefix.steps[j];
      w *= mixed[s_prev][a_prev][s_cur] * pi.agent_prob(i, s_cur, a_cur);
    }
    if (w > 0.0) out.entries.emplace_back(prefix, w);
  }
  return out;
}

/**
 * Dual value
 *   L(t+1) = sum_i sum_{tau_i} lambda*(tau_i) (Q_i(tau_i; pi*) - v_i(s0; pi*)),
 * computed in closed form: the trajectory sum telescopes into chain marginals
 * of the mixed process (pi_i, pi*_{-i}), so no enumeration is needed and the
 * result is exact for any t. Equals zero for pi = pi*, and converges to the
 * mixed-versus-expert reward gap as t grows.
 */
inline double dual_value(const MarkovGame& g, const JointPolicy& pi_star, const JointPolicy& pi,
                         int t) {
  if (t < 0) throw std::invalid_argument("dual_value: t must be >= 0");
  ValueTable values = bellman_values(g, pi_star);
  QTable q = q_values(g, pi_star, values);

  double dual = 0.0;
  for (int i = 0; i < g.num_agents; ++i) {
    JointPolicy mixed = compose_policy(pi, pi_star, i);
    const auto joint_prob = detail::joint_prob_table(g, mixed);

    std::vector<double> dist = g.initial_dist;
    double contribution = 0.0;
    double discount_pow = 1.0;
    const int ja_count = g.num_joint_actions();
    for (int j = 0; j < t; ++j) {
      std::vector<double> next(g.num_states, 0.0);
      for (int s = 0; s < g.num_states; ++s) {
        if (dist[s] == 0.0) continue;
        for (int ja = 0; ja < ja_count; ++ja) {
          double w = dist[s] * joint_prob[s][ja];
          if (w == 0.0) continue;
          contribution += discount_pow * w * g.rewards[i][s][ja];
          for (const auto& e : g.transition[s][ja]) next[e.state] += w * e.prob;
        }
      }
      dist.swap(next);
      discount_pow *= g.discount;
    }
    // Terminal pair scored by the one-step q under pi*.
    for (int s = 0; s < g.num_states; ++s) {
      if (dist[s] == 0.0) continue;
      for (int ai = 0; ai < g.action_counts[i]; ++ai) {
        double w = dist[s] * mixed.agent_prob(i, s, ai);
        if (w == 0.0) continue;
        contribution += discount_pow * w * q.q[i][s][ai];
      }
    }
    double baseline = 0.0;
    for (int s = 0; s < g.num_states; ++s) baseline += g.initial_dist[s] * values.v[i][s];
    dual += contribution - baseline;
  }
  return dual;
}

// ---------------------------------------------------------------------------
// Occupancy measures, returns and entropies
// ---------------------------------------------------------------------------

/**
 * Discounted occupancy: solves the flow system
 *   d(s) = eta(s) + discount * sum_{s', a'} d(s') pi(a'|s') T(s|s', a')
 * by dense LU, then rho(s, a) = d(s) pi(a|s). Residual checked to 1e-10.
 */
inline OccupancyTable occupancy_measure(const MarkovGame& g, const JointPolicy& pi) {
  const auto joint_prob = detail::joint_prob_table(g, pi);
  Eigen::MatrixXd P = detail::policy_transition_matrix(g, joint_prob);
  Eigen::MatrixXd A =
      Eigen::MatrixXd::Identity(g.num_states, g.num_states) - g.discount * P.transpose();
  Eigen::VectorXd eta(g.num_states);
  for (int s = 0; s < g.num_states; ++s) eta(s) = g.initial_dist[s];
  Eigen::VectorXd d = Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(eta);
  double residual = (A * d - eta).cwiseAbs().maxCoeff();
  if (residual > 1e-10)
    throw std::runtime_error("occupancy_measure: linear solve residual " +
                             std::to_string(residual));

  OccupancyTable out;
  out.discount = g.discount;
  out.state_mass.assign(d.data(), d.data() + g.num_states);
  const int ja_count = g.num_joint_actions();
  out.rho.assign(g.num_states, std::vector<double>(ja_count, 0.0));
  for (int s = 0; s < g.num_states; ++s)
    for (int ja = 0; ja < ja_count; ++ja) out.rho[s][ja] = out.state_mass[s] * joint_prob[s][ja];
  return out;
}

/// Total discounted expected return of one agent: sum_{s,a} rho(s,a) r_i(s,a).
inline double expected_return(const MarkovGame& g, const JointPolicy& pi, int agent) {
  if (agent < 0 || agent >= g.num_agents) throw std::out_of_range("expected_return: agent");
  OccupancyTable occ = occupancy_measure(g, pi);
  double total = 0.0;
  const int ja_count = g.num_joint_actions();
  for (int s = 0; s < g.num_states; ++s)
    for (int ja = 0; ja < ja_count; ++ja) total += occ.rho[s][ja] * g.rewards[agent][s][ja];
  return total;
}

/// Discounted causal entropy of the joint policy: E_rho[-log pi(a|s)].
inline double causal_entropy(const MarkovGame& g, const JointPolicy& pi) {
  OccupancyTable occ = occupancy_measure(g, pi);
  const auto joint_prob = detail::joint_prob_table(g, pi);
  double h = 0.0;
  const int ja_count = g.num_joint_actions();
  for (int s = 0; s < g.num_states; ++s)
    for (int ja = 0; ja < ja_count; ++ja) {
      double rho = occ.rho[s][ja];
      double p = joint_prob[s][ja];
      if (rho > 0.0 && p > 0.0) h -= rho * std::log(p);
    }
  return h;
}

/// Causal entropy of agent i's policy when the others follow `others`:
/// E over the composed process of -log pi_i(a_i | o_i(s)).
inline double agent_causal_entropy(const MarkovGame& g, const JointPolicy& pi_agent,
                                   const JointPolicy& others, int agent) {
  JointPolicy composed = compose_policy(pi_agent, others, agent);
  OccupancyTable occ = occupancy_measure(g, composed);
  double h = 0.0;
  const int ja_count = g.num_joint_actions();
  for (int s = 0; s < g.num_states; ++s) {
    for (int ja = 0; ja < ja_count; ++ja) {
      double rho = occ.rho[s][ja];
      if (rho == 0.0) continue;
      JointAction a = g.decode_action(ja);
      double p = composed.agent_prob(agent, s, a[agent]);
      if (p > 0.0) h -= rho * std::log(p);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Generative-adversarial conjugate
// ---------------------------------------------------------------------------

/**
 * Value of the inner discriminator maximization between two non-negative
 * tables, evaluated at the closed-form optimum D* = b/(a+b) per cell:
 *   max_D  E_b[log D] + E_a[log(1 - D)].
 * Inputs are normalized to probability distributions internally (for
 * occupancy tables this is multiplication by 1 - discount). Equal inputs give
 * -2 log 2; disjoint supports give 0.
 */
inline double psi_star_ga(std::span<const double> rho_a, std::span<const double> rho_b) {
  if (rho_a.size() != rho_b.size()) throw std::invalid_argument("psi_star_ga: shape mismatch");
  double mass_a = 0.0, mass_b = 0.0;
  for (double x : rho_a) {
    if (x < 0.0) throw std::invalid_argument("psi_star_ga: negative entry");
    mass_a += x;
  }
  for (double x : rho_b) {
    if (x < 0.0) throw std::invalid_argument("psi_star_ga: negative entry");
    mass_b += x;
  }
  if (mass_a == 0.0 || mass_b == 0.0) throw std::invalid_argument("psi_star_ga: all-zero input");

  double value = 0.0;
  for (std::size_t c = 0; c < rho_a.size(); ++c) {
    double p = rho_a[c] / mass_a;
    double q = rho_b[c] / mass_b;
    if (p == 0.0 && q == 0.0) continue;
    double denom = p + q;
    if (q > 0.0) value += q * std::log(q / denom);
    if (p > 0.0) value += p * std::log(p / denom);
  }
  return value;
}

inline std::vector<double> flatten(const std::vector<std::vector<double>>& table) {
  std::vector<double> flat;
  for (const auto& row : table) flat.insert(flat.end(), row.begin(), row.end());
  return flat;
}

inline double psi_star_ga(const OccupancyTable& a, const OccupancyTable& b) {
  std::vector<double> fa = flatten(a.rho), fb = flatten(b.rho);
  return psi_star_ga(std::span<const double>(fa), std::span<const double>(fb));
}

}  // namespace magail
