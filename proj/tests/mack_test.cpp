#include "magail/mack.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "gtest/gtest.h"
#include "magail/equilibria.hpp"
#include "magail/random_games.hpp"
#include "magail/solvers.hpp"

namespace magail {
namespace {

MarkovGame coordination_game(double discount) {
  MarkovGame g;
  g.id = "coordination";
  g.num_agents = 2;
  g.num_states = 1;
  g.action_counts = {2, 2};
  g.discount = discount;
  g.reward_bound = 1.0;
  g.transition.assign(1, std::vector<TransitionRow>(4, {{0, 1.0}}));
  g.rewards.assign(2, {std::vector<double>(4, 0.0)});
  g.rewards[0][0][0] = 1.0;
  g.rewards[1][0][0] = 1.0;
  g.initial_dist = {1.0};
  return g;
}

Batch sample_batch(const MarkovGame& g, const JointPolicy& pi, int episodes, int horizon,
                   Rng& rng) {
  GameDynamics d = strip_rewards(g, pi.obs);
  Batch batch;
  for (int e = 0; e < episodes; ++e) {
    RewardedTrajectory rt;
    rt.traj = sample_trajectory(d, pi, horizon, rng);
    for (int t = 0; t < horizon; ++t) {
      int ja = g.encode_action(rt.traj.actions[t]);
      std::vector<double> r(g.num_agents);
      for (int i = 0; i < g.num_agents; ++i) r[i] = g.rewards[i][rt.traj.states[t]][ja];
      rt.rewards.push_back(r);
    }
    batch.push_back(std::move(rt));
  }
  return batch;
}

TEST(ComputeAdvantages, zeroBaselineUnitHorizonIsReward) {
  Rng rng(90, "mk");
  MarkovGame g = random_game(2, 3, {2, 2}, 0.9, rng);
  JointPolicy pi = random_policy(g, ObservationMap::identity(2, 3), rng);
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng sample_rng(91, "sample");
  Batch batch = sample_batch(g, pi, 4, 10, sample_rng);
  BaselineTable zero = BaselineTable::zeros(d);
  auto adv = compute_advantages(d, batch, zero, 0, 1, g.discount);
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (int t = 0; t < 10; ++t) EXPECT_DOUBLE_EQ(adv[e][t], batch[e].rewards[t][0]);
}

TEST(ComputeAdvantages, perfectConstantBaselineGivesZero) {
  // Constant reward everywhere; V = c / (1 - gamma) cancels every term.
  MarkovGame g = coordination_game(0.8);
  for (auto& per_agent : g.rewards)
    for (auto& row : per_agent) row.assign(4, 0.5);
  JointPolicy pi = JointPolicy::uniform(g, ObservationMap::identity(2, 1));
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng rng(92, "sample");
  Batch batch = sample_batch(g, pi, 3, 12, rng);
  BaselineTable v = BaselineTable::zeros(d);
  for (auto& agent_table : v.v)
    for (auto& row : agent_table) row.assign(row.size(), 0.5 / (1.0 - 0.8));
  for (int i = 0; i < 2; ++i) {
    auto adv = compute_advantages(d, batch, v, i, 5, g.discount);
    for (const auto& per_traj : adv)
      for (double a : per_traj) EXPECT_NEAR(a, 0.0, 1e-9);
  }
}

TEST(ComputeAdvantages, matchesIndependentReimplementation) {
  Rng rng(93, "mk");
  MarkovGame g = random_game(2, 4, {2, 3}, 0.9, rng);
  JointPolicy pi = random_policy(g, ObservationMap::identity(2, 4), rng);
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng sample_rng(94, "sample");
  Batch batch = sample_batch(g, pi, 5, 15, sample_rng);
  BaselineTable v = BaselineTable::zeros(d);
  Rng fill(95, "fill");
  for (auto& agent_table : v.v)
    for (auto& row : agent_table)
      for (double& cell : row) cell = fill.uniform(-1.0, 1.0);

  const int k = 4;
  for (int i = 0; i < 2; ++i) {
    auto adv = compute_advantages(d, batch, v, i, k, g.discount);
    for (std::size_t e = 0; e < batch.size(); ++e) {
      const auto& traj = batch[e].traj;
      const int H = traj.horizon();
      for (int t = 0; t < H; ++t) {
        // Reverse-order accumulation, independent of the implementation.
        int m = std::min(k, H - t);
        double acc = 0.0;
        for (int j = m - 1; j >= 0; --j) acc = batch[e].rewards[t + j][i] + 0.9 * acc;
        double boot = std::pow(0.9, m);
        int other = d.encode_other_action(traj.actions[t], i);
        int boot_state = traj.states[std::min(t + m, H - 1)];
        double expected = acc + boot * v.v[i][boot_state][other] - v.v[i][traj.states[t]][other];
        EXPECT_NEAR(adv[e][t], expected, 1e-12);
      }
    }
  }
}

TEST(ComputeAdvantages, rejectsHorizonShorterThanK) {
  Rng rng(96, "mk");
  MarkovGame g = random_game(2, 3, {2, 2}, 0.9, rng);
  JointPolicy pi = random_policy(g, ObservationMap::identity(2, 3), rng);
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng sample_rng(97, "sample");
  Batch batch = sample_batch(g, pi, 1, 3, sample_rng);
  BaselineTable v = BaselineTable::zeros(d);
  EXPECT_THROW(compute_advantages(d, batch, v, 0, 4, g.discount), std::invalid_argument);
}

TEST(UpdateBaselines, zeroRateLeavesTableUntouched) {
  Rng rng(98, "mk");
  MarkovGame g = random_game(2, 3, {2, 2}, 0.9, rng);
  JointPolicy pi = random_policy(g, ObservationMap::identity(2, 3), rng);
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng sample_rng(99, "sample");
  Batch batch = sample_batch(g, pi, 3, 8, sample_rng);
  BaselineTable v = BaselineTable::zeros(d);
  auto targets = compute_baseline_targets(d, batch, v, 0, 3, g.discount);
  BaselineTable before = v;
  update_baselines(d, v, batch, targets, 0, 0.0);
  EXPECT_EQ(v.v, before.v);
}

TEST(UpdateBaselines, fullRateLandsOnCellMean) {
  MarkovGame g = coordination_game(0.5);
  JointPolicy pi;
  pi.obs = ObservationMap::identity(2, 1);
  pi.agents = {AgentPolicy::deterministic(1, 2, 0), AgentPolicy::deterministic(1, 2, 0)};
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng rng(100, "sample");
  Batch batch = sample_batch(g, pi, 2, 6, rng);
  BaselineTable v = BaselineTable::zeros(d);
  auto targets = compute_baseline_targets(d, batch, v, 0, 2, g.discount);
  double mean = 0.0;
  int count = 0;
  for (const auto& per_traj : targets)
    for (double t : per_traj) {
      mean += t;
      ++count;
    }
  mean /= count;  // deterministic rollout visits a single (state, a_{-i}) cell
  update_baselines(d, v, batch, targets, 0, 1.0);
  EXPECT_NEAR(v.v[0][0][0], mean, 1e-12);
}

TEST(UpdateBaselines, repeatedUpdatesConvergeOnFixedBatch) {
  // Deterministic game and policy: the bootstrapped regression has an exact
  // fixed point, so the error must die out.
  MarkovGame g = coordination_game(0.7);
  JointPolicy pi;
  pi.obs = ObservationMap::identity(2, 1);
  pi.agents = {AgentPolicy::deterministic(1, 2, 0), AgentPolicy::deterministic(1, 2, 0)};
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng rng(101, "sample");
  Batch batch = sample_batch(g, pi, 2, 10, rng);
  BaselineTable v = BaselineTable::zeros(d);
  double mse = 1.0;
  for (int it = 0; it < 200; ++it) {
    auto targets = compute_baseline_targets(d, batch, v, 0, 3, g.discount);
    mse = update_baselines(d, v, batch, targets, 0, 1.0);
  }
  EXPECT_LT(mse, 1e-6);
}

TEST(NaturalDirection, solvesDampedFisherSystem) {
  Rng rng(102, "mk");
  for (int n = 0; n < 20; ++n) {
    int actions = 2 + rng.uniform_int(4);
    std::vector<double> p = random_simplex(actions, rng);
    std::vector<double> grad(actions);
    for (double& gv : grad) gv = rng.uniform(-1.0, 1.0);
    const double eps = 1e-3;
    auto dir = detail::natural_direction(p, grad, eps);
    // (diag(p) - p p^T + eps I) dir must reproduce grad.
    for (int a = 0; a < actions; ++a) {
      double dot = 0.0;
      for (int b = 0; b < actions; ++b) dot += p[b] * dir[b];
      double lhs = (p[a] + eps) * dir[a] - p[a] * dot;
      EXPECT_NEAR(lhs, grad[a], 1e-12);
    }
  }
}

TEST(FisherMatrix, dampedEigenvaluesStayPositive) {
  Rng rng(103, "mk");
  const double eps = 1e-3;
  for (int n = 0; n < 20; ++n) {
    int actions = 2 + rng.uniform_int(4);
    std::vector<double> p = random_simplex(actions, rng);
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(actions, actions);
    for (int a = 0; a < actions; ++a) {
      f(a, a) = p[a] + eps;
      for (int b = 0; b < actions; ++b) f(a, b) -= p[a] * p[b];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f);
    EXPECT_GE(eig.eigenvalues().minCoeff(), eps / 2.0);
  }
}

TEST(NaturalPolicyStep, zeroAdvantagesLeaveLogitsFixed) {
  Rng rng(104, "mk");
  MarkovGame g = random_game(2, 3, {2, 2}, 0.9, rng);
  JointPolicy pi = random_policy(g, ObservationMap::identity(2, 3), rng);
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng sample_rng(105, "sample");
  Batch batch = sample_batch(g, pi, 3, 8, sample_rng);
  PolicyParams params = PolicyParams::zeros(d);
  std::vector<std::vector<double>> zero_adv(batch.size(), std::vector<double>(8, 0.0));
  natural_policy_step(d, params, batch, zero_adv, 0, 0.5, 1e-3);
  for (const auto& row : params.logits[0])
    for (double x : row) EXPECT_DOUBLE_EQ(x, 0.0);
}

TEST(NaturalPolicyStep, positiveAdvantageRaisesActionProbability) {
  MarkovGame g = coordination_game(0.9);
  JointPolicy pi = JointPolicy::uniform(g, ObservationMap::identity(2, 1));
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng rng(106, "sample");
  Batch batch = sample_batch(g, pi, 4, 10, rng);
  PolicyParams params = PolicyParams::zeros(d);
  std::vector<std::vector<double>> adv(batch.size(), std::vector<double>(10, 0.0));
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (int t = 0; t < 10; ++t)
      adv[e][t] = batch[e].traj.actions[t][0] == 0 ? 1.0 : 0.0;
  double before = params.row_probs(0, 0)[0];
  natural_policy_step(d, params, batch, adv, 0, 0.5, 1e-3);
  EXPECT_GT(params.row_probs(0, 0)[0], before);
}

TEST(NaturalPolicyStep, rejectsNonFiniteGradient) {
  MarkovGame g = coordination_game(0.9);
  JointPolicy pi = JointPolicy::uniform(g, ObservationMap::identity(2, 1));
  GameDynamics d = strip_rewards(g, pi.obs);
  Rng rng(107, "sample");
  Batch batch = sample_batch(g, pi, 1, 4, rng);
  PolicyParams params = PolicyParams::zeros(d);
  std::vector<std::vector<double>> adv(1, std::vector<double>(4, 0.0));
  adv[0][2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(natural_policy_step(d, params, batch, adv, 0, 0.5, 1e-3), std::runtime_error);
}

TEST(SurrogateGradient, matchesCentralFiniteDifferences) {
  Rng rng(108, "mk");
  for (int trial = 0; trial < 20; ++trial) {
    MarkovGame g = random_game_capped(2, 3, 3, 0.9, rng);
    ObservationMap id = ObservationMap::identity(g.num_agents, g.num_states);
    JointPolicy pi = random_policy(g, id, rng);
    GameDynamics d = strip_rewards(g, id);
    Rng sample_rng(200 + trial, "sample");
    Batch batch = sample_batch(g, pi, 2, 6, sample_rng);
    PolicyParams params = PolicyParams::from_policy(pi);

    std::vector<std::vector<double>> adv(batch.size(), std::vector<double>(6, 0.0));
    Rng adv_rng(300 + trial, "adv");
    for (auto& row : adv)
      for (double& a : row) a = adv_rng.uniform(-1.0, 1.0);

    const int agent = trial % g.num_agents;
    auto grad = surrogate_gradient(d, params, batch, adv, agent);
    const double h = 1e-5;
    for (int o = 0; o < d.obs.observation_counts[agent]; ++o)
      for (int a = 0; a < g.action_counts[agent]; ++a) {
        PolicyParams plus = params, minus = params;
        plus.logits[agent][o][a] += h;
        minus.logits[agent][o][a] -= h;
        double fd = (surrogate_value(d, plus, batch, adv, agent) -
                     surrogate_value(d, minus, batch, adv, agent)) /
                    (2.0 * h);
        double scale = std::max({std::abs(fd), std::abs(grad[o][a]), 1e-6});
        EXPECT_LE(std::abs(fd - grad[o][a]) / scale, 1e-5)
            << "agent " << agent << " obs " << o << " action " << a;
      }
  }
}

TEST(TrainMack, learnsCoordinationGame) {
  MarkovGame g = coordination_game(0.9);
  GameDynamics d = strip_rewards(g, ObservationMap::identity(2, 1));
  double optimal = 1.0 / (1.0 - 0.9);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    MackConfig cfg;
    cfg.iterations = 200;
    cfg.batch_size = 16;
    cfg.rollout_horizon = 20;
    cfg.seed = seed;
    MackResult res = train_mack(d, true_reward_fn(g), cfg);
    double ret = expected_return(g, res.policy, 0);
    EXPECT_GE(ret, 0.95 * optimal) << "seed " << seed;
  }
}

TEST(TrainMack, zeroRateKeepsInitialPolicy) {
  MarkovGame g = coordination_game(0.9);
  GameDynamics d = strip_rewards(g, ObservationMap::identity(2, 1));
  MackConfig cfg;
  cfg.iterations = 10;
  cfg.batch_size = 4;
  cfg.rollout_horizon = 8;
  cfg.policy_lr = 0.0;
  MackResult res = train_mack(d, true_reward_fn(g), cfg);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(res.policy.agents[i].probs[0][0], 0.5, 1e-12);
}

TEST(TrainMack, sameSeedSameLog) {
  MarkovGame g = coordination_game(0.9);
  GameDynamics d = strip_rewards(g, ObservationMap::identity(2, 1));
  MackConfig cfg;
  cfg.iterations = 30;
  cfg.batch_size = 8;
  cfg.rollout_horizon = 10;
  cfg.seed = 7;
  MackResult a = train_mack(d, true_reward_fn(g), cfg);
  MackResult b = train_mack(d, true_reward_fn(g), cfg);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t n = 0; n < a.log.size(); ++n) {
    EXPECT_EQ(a.log[n].mean_return, b.log[n].mean_return);
    EXPECT_EQ(a.log[n].surrogate, b.log[n].surrogate);
    EXPECT_EQ(a.log[n].baseline_mse, b.log[n].baseline_mse);
  }
  EXPECT_EQ(a.policy.agents[0].probs, b.policy.agents[0].probs);
}

TEST(TrainMack, returnsImproveAcrossSmoothedWindows) {
  MarkovGame g = coordination_game(0.9);
  GameDynamics d = strip_rewards(g, ObservationMap::identity(2, 1));
  MackConfig cfg;
  cfg.iterations = 200;
  cfg.batch_size = 16;
  cfg.rollout_horizon = 20;
  cfg.seed = 3;
  MackResult res = train_mack(d, true_reward_fn(g), cfg);
  std::vector<double> window_means;
  for (int w = 0; w < 20; ++w) {
    double mean = 0.0;
    int count = 0;
    for (const auto& row : res.log)
      if (row.agent == 0 && row.iter >= 10 * w && row.iter < 10 * (w + 1)) {
        mean += row.mean_return;
        ++count;
      }
    window_means.push_back(mean / count);
  }
  double optimal = 1.0 / (1.0 - 0.9);
  for (std::size_t w = 1; w < window_means.size(); ++w)
    EXPECT_GE(window_means[w], window_means[w - 1] - 0.02 * optimal) << "window " << w;
  EXPECT_GT(window_means.back(), window_means.front());
}

TEST(TrainMack, perfectBaselineZerosAdvantagesInExpectation) {
  // Oracle: the exact k-step conditional value per (state, a_{-i}) cell makes
  // the mean sampled advantage vanish cell by cell.
  Rng rng(109, "mk");
  MarkovGame g = random_game(2, 3, {2, 2}, 0.8, rng);
  JointPolicy pi = random_policy(g, ObservationMap::identity(2, 3), rng);
  GameDynamics d = strip_rewards(g, pi.obs);
  const int agent = 0, k = 3;
  const int S = g.num_states;

  // Full-policy one-step kernel and expected reward.
  Eigen::MatrixXd m_pi = Eigen::MatrixXd::Zero(S, S);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s)
    for (int ja = 0; ja < g.num_joint_actions(); ++ja) {
      JointAction a = g.decode_action(ja);
      double w = joint_policy_prob(pi, s, a);
      r_pi(s) += w * g.rewards[agent][s][ja];
      for (const auto& e : g.transition[s][ja]) m_pi(s, e.state) += w * e.prob;
    }

  BaselineTable v = BaselineTable::zeros(d);
  const int other_count = d.num_other_actions(agent);
  for (int b = 0; b < other_count; ++b) {
    // First step conditioned on a_{-i} = b, remaining k-1 steps on pi.
    Eigen::MatrixXd p0 = Eigen::MatrixXd::Zero(S, S);
    Eigen::VectorXd r0 = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s)
      for (int ai = 0; ai < g.action_counts[agent]; ++ai) {
        JointAction a(2);
        a[agent] = ai;
        a[1 - agent] = b;
        double w = pi.agent_prob(agent, s, ai);
        int ja = g.encode_action(a);
        r0(s) += w * g.rewards[agent][s][ja];
        for (const auto& e : g.transition[s][ja]) p0(s, e.state) += w * e.prob;
      }
    Eigen::VectorXd r_k = r0;
    Eigen::MatrixXd reach = p0;
    double discount_pow = g.discount;
    for (int j = 1; j < k; ++j) {
      r_k += discount_pow * reach * r_pi;
      reach = reach * m_pi;
      discount_pow *= g.discount;
    }
    // V_b = r_k + gamma^k P_k V_b.
    Eigen::MatrixXd a_mat =
        Eigen::MatrixXd::Identity(S, S) - std::pow(g.discount, k) * reach;
    Eigen::VectorXd v_b = a_mat.partialPivLu().solve(r_k);
    for (int s = 0; s < S; ++s) v.v[agent][s][b] = v_b(s);
  }

  Rng sample_rng(110, "sample");
  const int episodes = 2500, horizon = 40;  // 1e5 sampled steps
  Batch batch = sample_batch(g, pi, episodes, horizon, sample_rng);
  auto adv = compute_advantages(d, batch, v, agent, k, g.discount);

  struct CellStat {
    double sum = 0.0, sum_sq = 0.0;
    long count = 0;
  };
  std::vector<std::vector<CellStat>> stats(S, std::vector<CellStat>(other_count));
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (int t = 0; t + k <= horizon - 1; ++t) {  // only fully-bootstrapped steps
      int s = batch[e].traj.states[t];
      int b = d.encode_other_action(batch[e].traj.actions[t], agent);
      stats[s][b].sum += adv[e][t];
      stats[s][b].sum_sq += adv[e][t] * adv[e][t];
      stats[s][b].count += 1;
    }
  for (int s = 0; s < S; ++s)
    for (int b = 0; b < other_count; ++b) {
      if (stats[s][b].count < 100) continue;
      double mean = stats[s][b].sum / stats[s][b].count;
      double var =
          (stats[s][b].sum_sq / stats[s][b].count - mean * mean) / stats[s][b].count;
      double se = std::sqrt(std::max(var, 1e-18));
      EXPECT_LE(std::abs(mean), 3.0 * se + 1e-9) << "cell (" << s << "," << b << ")";
    }
}

TEST(TrainMack, entropyBonusKeepsPolicySofter) {
  MarkovGame g = coordination_game(0.9);
  GameDynamics d = strip_rewards(g, ObservationMap::identity(2, 1));
  MackConfig sharp;
  sharp.iterations = 150;
  sharp.batch_size = 16;
  sharp.rollout_horizon = 20;
  sharp.seed = 11;
  MackConfig soft = sharp;
  soft.entropy_coef = 1.0;
  MackResult a = train_mack(d, true_reward_fn(g), sharp);
  MackResult b = train_mack(d, true_reward_fn(g), soft);
  double sharp_top = *std::max_element(a.policy.agents[0].probs[0].begin(),
                                       a.policy.agents[0].probs[0].end());
  double soft_top = *std::max_element(b.policy.agents[0].probs[0].begin(),
                                      b.policy.agents[0].probs[0].end());
  EXPECT_LT(soft_top, sharp_top);
}

}  // namespace
}  // namespace magail
