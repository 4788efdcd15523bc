#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "magail/game.hpp"
#include "magail/solvers.hpp"

namespace magail {

/// Two-player zero-sum matrix game; payoff is the row player's, the column
/// player receives its negation.
struct MatrixGame {
  std::vector<std::vector<double>> payoff;

  int rows() const { return static_cast<int>(payoff.size()); }
  int cols() const { return payoff.empty() ? 0 : static_cast<int>(payoff[0].size()); }
};

struct SolverReport {
  int iterations = 0;
  double residual = 0.0;
  double tolerance = 0.0;
};

struct MatrixSolution {
  std::vector<double> row_strategy;
  std::vector<double> col_strategy;
  double value = 0.0;
  SolverReport report;
};

class MatrixSolveError : public std::runtime_error {
 public:
  MatrixSolveError(const std::string& msg, MatrixSolution best)
      : std::runtime_error(msg), best_found(std::move(best)) {}
  MatrixSolution best_found;
};

namespace detail {

inline double best_row_response(const MatrixGame& m, const std::vector<double>& col) {
  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < m.rows(); ++r) {
    double u = 0.0;
    for (int c = 0; c < m.cols(); ++c) u += m.payoff[r][c] * col[c];
    best = std::max(best, u);
  }
  return best;
}

inline double best_col_response(const MatrixGame& m, const std::vector<double>& row) {
  double best = std::numeric_limits<double>::infinity();
  for (int c = 0; c < m.cols(); ++c) {
    double u = 0.0;
    for (int r = 0; r < m.rows(); ++r) u += m.payoff[r][c] * row[r];
    best = std::min(best, u);
  }
  return best;
}

inline double pair_value(const MatrixGame& m, const std::vector<double>& row,
                         const std::vector<double>& col) {
  double v = 0.0;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) v += row[r] * m.payoff[r][c] * col[c];
  return v;
}

/// Gap between the players' best responses to the averaged strategies; zero
/// exactly at a saddle point.
inline double exploitability(const MatrixGame& m, const std::vector<double>& row,
                             const std::vector<double>& col) {
  return best_row_response(m, col) - best_col_response(m, row);
}

}  // namespace detail

/**
 * Regret-matching+ self-play with linearly weighted strategy averaging.
 * Returns averaged strategies once their exploitability drops to `tol`;
 * throws MatrixSolveError carrying the best pair found if `max_iters` runs
 * out first.
 */
inline MatrixSolution solve_matrix_game(const MatrixGame& m, double tol, int max_iters = 200000) {
  const int R = m.rows(), C = m.cols();
  if (R == 0 || C == 0) throw std::invalid_argument("solve_matrix_game: empty payoff matrix");
  for (const auto& row : m.payoff)
    for (double v : row)
      if (!std::isfinite(v)) throw std::invalid_argument("solve_matrix_game: non-finite payoff");

  std::vector<double> regret_row(R, 0.0), regret_col(C, 0.0);
  std::vector<double> avg_row(R, 0.0), avg_col(C, 0.0);
  std::vector<double> x(R, 1.0 / R), y(C, 1.0 / C);

  auto to_strategy = [](const std::vector<double>& regret, std::vector<double>& out) {
    double sum = 0.0;
    for (double r : regret) sum += std::max(r, 0.0);
    if (sum <= 0.0) {
      std::fill(out.begin(), out.end(), 1.0 / out.size());
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(regret[i], 0.0) / sum;
    }
  };

  MatrixSolution best;
  best.report.residual = std::numeric_limits<double>::infinity();
  double avg_weight = 0.0;

  for (int iter = 1; iter <= max_iters; ++iter) {
    // Alternating updates: the row player responds to the current column
    // strategy, then the column player responds to the refreshed row.
    to_strategy(regret_row, x);
    to_strategy(regret_col, y);
    std::vector<double> u_row(R, 0.0);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) u_row[r] += m.payoff[r][c] * y[c];
    double ev_row = 0.0;
    for (int r = 0; r < R; ++r) ev_row += x[r] * u_row[r];
    for (int r = 0; r < R; ++r) regret_row[r] = std::max(0.0, regret_row[r] + u_row[r] - ev_row);

    to_strategy(regret_row, x);
    std::vector<double> u_col(C, 0.0);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) u_col[c] += m.payoff[r][c] * x[r];
    double ev_col = 0.0;
    for (int c = 0; c < C; ++c) ev_col += y[c] * u_col[c];
    for (int c = 0; c < C; ++c) regret_col[c] = std::max(0.0, regret_col[c] + ev_col - u_col[c]);

    for (int r = 0; r < R; ++r) avg_row[r] += iter * x[r];
    for (int c = 0; c < C; ++c) avg_col[c] += iter * y[c];
    avg_weight += iter;

    if (iter % 64 == 0 || iter == max_iters) {
      MatrixSolution cur;
      cur.row_strategy.assign(R, 0.0);
      cur.col_strategy.assign(C, 0.0);
      for (int r = 0; r < R; ++r) cur.row_strategy[r] = avg_row[r] / avg_weight;
      for (int c = 0; c < C; ++c) cur.col_strategy[c] = avg_col[c] / avg_weight;
      cur.value = detail::pair_value(m, cur.row_strategy, cur.col_strategy);
      cur.report.iterations = iter;
      cur.report.residual = detail::exploitability(m, cur.row_strategy, cur.col_strategy);
      cur.report.tolerance = tol;
      if (cur.report.residual < best.report.residual) best = cur;
      if (best.report.residual <= tol) return best;
    }
  }
  throw MatrixSolveError("solve_matrix_game: exploitability " +
                             std::to_string(best.report.residual) + " above tol after " +
                             std::to_string(max_iters) + " iterations",
                         best);
}

namespace detail {

/**
 * Exact zero-sum matrix solve by support enumeration: for each square support
 * pair, solve the equalizing linear system and keep the first pair satisfying
 * feasibility and the saddle inequalities. Used inside Shapley iteration where
 * subgame values must be accurate to machine precision; falls back to regret
 * matching if enumeration fails numerically.
 */
inline MatrixSolution solve_matrix_game_exact(const MatrixGame& m) {
  const int R = m.rows(), C = m.cols();
  const double eps = 1e-9;

  // Pure saddle points first.
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) {
      double v = m.payoff[r][c];
      bool saddle = true;
      for (int r2 = 0; r2 < R && saddle; ++r2)
        if (m.payoff[r2][c] > v + eps) saddle = false;
      for (int c2 = 0; c2 < C && saddle; ++c2)
        if (m.payoff[r][c2] < v - eps) saddle = false;
      if (saddle) {
        MatrixSolution sol;
        sol.row_strategy.assign(R, 0.0);
        sol.col_strategy.assign(C, 0.0);
        sol.row_strategy[r] = 1.0;
        sol.col_strategy[c] = 1.0;
        sol.value = v;
        sol.report = {1, 0.0, 0.0};
        return sol;
      }
    }

  const int max_k = std::min(R, C);
  for (int k = 2; k <= max_k; ++k) {
    std::vector<int> rs(k), cs(k);
    // Enumerate k-subsets via bitmasks; fine for the small matrices used here.
    for (int rmask = 0; rmask < (1 << R); ++rmask) {
      if (__builtin_popcount(rmask) != k) continue;
      int ri = 0;
      for (int r = 0; r < R; ++r)
        if (rmask & (1 << r)) rs[ri++] = r;
      for (int cmask = 0; cmask < (1 << C); ++cmask) {
        if (__builtin_popcount(cmask) != k) continue;
        int ci = 0;
        for (int c = 0; c < C; ++c)
          if (cmask & (1 << c)) cs[ci++] = c;

        // Solve for y on cs equalizing the rows in rs, and the value.
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k + 1, k + 1);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(k + 1);
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) A(i, j) = m.payoff[rs[i]][cs[j]];
          A(i, k) = -1.0;  // minus the game value
        }
        for (int j = 0; j < k; ++j) A(k, j) = 1.0;
        b(k) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible()) continue;
        Eigen::VectorXd sol_y = lu.solve(b);

        // Solve for x on rs equalizing the columns in cs.
        Eigen::MatrixXd At = Eigen::MatrixXd::Zero(k + 1, k + 1);
        Eigen::VectorXd bt = Eigen::VectorXd::Zero(k + 1);
        for (int j = 0; j < k; ++j) {
          for (int i = 0; i < k; ++i) At(j, i) = m.payoff[rs[i]][cs[j]];
          At(j, k) = -1.0;
        }
        for (int i = 0; i < k; ++i) At(k, i) = 1.0;
        bt(k) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lut(At);
        if (!lut.isInvertible()) continue;
        Eigen::VectorXd sol_x = lut.solve(bt);

        double v = sol_y(k);
        bool ok = std::abs(sol_x(k) - v) <= 1e-7;
        for (int i = 0; i < k && ok; ++i)
          if (sol_x(i) < -eps || sol_y(i) < -eps) ok = false;
        if (!ok) continue;

        MatrixSolution out;
        out.row_strategy.assign(R, 0.0);
        out.col_strategy.assign(C, 0.0);
        for (int i = 0; i < k; ++i) {
          out.row_strategy[rs[i]] = std::max(0.0, sol_x(i));
          out.col_strategy[cs[i]] = std::max(0.0, sol_y(i));
        }
        // Saddle optimality: no pure deviation beats the candidate value.
        ok = true;
        for (int r = 0; r < R && ok; ++r) {
          double u = 0.0;
          for (int c = 0; c < C; ++c) u += m.payoff[r][c] * out.col_strategy[c];
          if (u > v + 1e-8) ok = false;
        }
        for (int c = 0; c < C && ok; ++c) {
          double u = 0.0;
          for (int r = 0; r < R; ++r) u += m.payoff[r][c] * out.row_strategy[r];
          if (u < v - 1e-8) ok = false;
        }
        if (!ok) continue;
        out.value = v;
        out.report = {1, exploitability(m, out.row_strategy, out.col_strategy), 0.0};
        return out;
      }
    }
  }
  // Degenerate numerics; regret matching is the anytime fallback.
  return solve_matrix_game(m, 1e-9, 2000000);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Team games: joint value iteration
// ---------------------------------------------------------------------------

/**
 * Exact planner for identical-reward games: value iteration on the
 * joint-action MDP, then the greedy deterministic joint action (lowest index
 * on ties) split into per-agent deterministic policies. The result is an
 * equilibrium of the team game and passes nash_check at 10*tol/(1-discount).
 */
inline std::pair<JointPolicy, SolverReport> solve_team_vi(const MarkovGame& g, double tol) {
  ValidationReport rep = validate_game(g);
  if (!rep.ok()) throw std::invalid_argument("solve_team_vi: invalid game");
  const int ja_count = g.num_joint_actions();
  for (int i = 1; i < g.num_agents; ++i)
    for (int s = 0; s < g.num_states; ++s)
      for (int ja = 0; ja < ja_count; ++ja)
        if (g.rewards[i][s][ja] != g.rewards[0][s][ja])
          throw std::invalid_argument("solve_team_vi: rewards differ at agent " +
                                      std::to_string(i) + " state " + std::to_string(s) +
                                      " action " + std::to_string(ja));

  // Sweep threshold below the declared tol; the certificate only sharpens.
  const double sweep_tol = tol * (1.0 - g.discount);
  // Starting from a guaranteed subsolution keeps the iterates monotone
  // non-decreasing sweep over sweep.
  double r_min = 0.0;
  for (const auto& row : g.rewards[0])
    for (double r : row) r_min = std::min(r_min, r);
  std::vector<double> v(g.num_states, r_min / (1.0 - g.discount));
  std::vector<double> v_next(g.num_states, 0.0);
  int sweeps = 0;
  double residual = std::numeric_limits<double>::infinity();
  const int max_sweeps = 1000000;
  while (residual > sweep_tol && sweeps < max_sweeps) {
    for (int s = 0; s < g.num_states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int ja = 0; ja < ja_count; ++ja) {
        double q = g.rewards[0][s][ja] + g.discount * detail::expected_next_value(g, s, ja, v);
        if (q > best) best = q;
      }
      v_next[s] = best;
    }
    residual = 0.0;
    for (int s = 0; s < g.num_states; ++s)
      residual = std::max(residual, std::abs(v_next[s] - v[s]));
    v.swap(v_next);
    ++sweeps;
  }

  JointPolicy pi;
  pi.obs = ObservationMap::identity(g.num_agents, g.num_states);
  for (int i = 0; i < g.num_agents; ++i) {
    AgentPolicy ap;
    ap.probs.assign(g.num_states, std::vector<double>(g.action_counts[i], 0.0));
    pi.agents.push_back(std::move(ap));
  }
  for (int s = 0; s < g.num_states; ++s) {
    int best_ja = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int ja = 0; ja < ja_count; ++ja) {
      double q = g.rewards[0][s][ja] + g.discount * detail::expected_next_value(g, s, ja, v);
      if (q > best) {  // strict: ties go to the lowest joint index
        best = q;
        best_ja = ja;
      }
    }
    JointAction a = g.decode_action(best_ja);
    for (int i = 0; i < g.num_agents; ++i) pi.agents[i].probs[s][a[i]] = 1.0;
  }
  return {pi, SolverReport{sweeps, residual, tol}};
}

// ---------------------------------------------------------------------------
// Two-player zero-sum games: Shapley iteration
// ---------------------------------------------------------------------------

/**
 * Shapley iteration for 2-agent games with r_1 = -r_2: each sweep solves, per
 * state, the matrix game with payoffs r_1(s, a) + discount * E[v(s')], until
 * the value residual falls below an internal threshold derived from `tol`.
 * Subgames are solved exactly (support enumeration) so the returned mixed
 * policies pass nash_check well inside 10*tol/(1-discount).
 */
inline std::pair<JointPolicy, SolverReport> solve_zero_sum_shapley(const MarkovGame& g,
                                                                   double tol) {
  if (g.num_agents != 2) throw std::invalid_argument("solve_zero_sum_shapley: requires 2 agents");
  ValidationReport rep = validate_game(g);
  if (!rep.ok()) throw std::invalid_argument("solve_zero_sum_shapley: invalid game");
  const int ja_count = g.num_joint_actions();
  for (int s = 0; s < g.num_states; ++s)
    for (int ja = 0; ja < ja_count; ++ja)
      if (g.rewards[0][s][ja] != -g.rewards[1][s][ja])
        throw std::invalid_argument("solve_zero_sum_shapley: not zero-sum at state " +
                                    std::to_string(s) + " action " + std::to_string(ja));

  const double gamma = g.discount;
  const double sweep_tol =
      gamma > 0.0 ? std::min(tol, tol * (1.0 - gamma) * (1.0 - gamma) / (2.0 * gamma * gamma))
                  : tol;

  std::vector<double> v(g.num_states, 0.0);
  std::vector<MatrixSolution> solutions(g.num_states);
  int sweeps = 0;
  double residual = std::numeric_limits<double>::infinity();
  const int max_sweeps = 1000000;
  while (sweeps < max_sweeps) {
    residual = 0.0;
    for (int s = 0; s < g.num_states; ++s) {
      MatrixGame m;
      m.payoff.assign(g.action_counts[0], std::vector<double>(g.action_counts[1], 0.0));
      for (int a0 = 0; a0 < g.action_counts[0]; ++a0)
        for (int a1 = 0; a1 < g.action_counts[1]; ++a1) {
          JointAction a = {a0, a1};
          int ja = g.encode_action(a);
          m.payoff[a0][a1] = g.rewards[0][s][ja] + gamma * detail::expected_next_value(g, s, ja, v);
        }
      solutions[s] = detail::solve_matrix_game_exact(m);
      residual = std::max(residual, std::abs(solutions[s].value - v[s]));
      v[s] = solutions[s].value;
    }
    ++sweeps;
    if (residual <= sweep_tol) break;
    if (gamma == 0.0) break;  // one sweep is exact without bootstrapping
  }

  JointPolicy pi;
  pi.obs = ObservationMap::identity(2, g.num_states);
  pi.agents.resize(2);
  pi.agents[0].probs.assign(g.num_states, {});
  pi.agents[1].probs.assign(g.num_states, {});
  for (int s = 0; s < g.num_states; ++s) {
    pi.agents[0].probs[s] = solutions[s].row_strategy;
    pi.agents[1].probs[s] = solutions[s].col_strategy;
  }
  return {pi, SolverReport{sweeps, residual, tol}};
}

}  // namespace magail
