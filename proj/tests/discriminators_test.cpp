#include "magail/discriminators.hpp"

#include <cmath>
#include <memory>

#include "gtest/gtest.h"
#include "magail/random_games.hpp"
#include "magail/solvers.hpp"

namespace magail {
namespace {

struct DiscFixture {
  MarkovGame game;
  GameDynamics dynamics;
};

DiscFixture make_setup(int num_agents, int num_states, std::vector<int> actions, std::uint64_t seed) {
  static std::vector<std::unique_ptr<MarkovGame>> keep_alive;
  Rng rng(seed, "mk");
  keep_alive.push_back(
      std::make_unique<MarkovGame>(random_game(num_agents, num_states, actions, 0.9, rng)));
  MarkovGame& g = *keep_alive.back();
  return {g, strip_rewards(g, ObservationMap::identity(num_agents, num_states))};
}

TEST(DiscForward, zeroWeightsScoreHalf) {
  DiscFixture s = make_setup(2, 3, {2, 2}, 120);
  for (PriorKind kind :
       {PriorKind::Centralized, PriorKind::Decentralized, PriorKind::ZeroSum}) {
    DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {kind, 0});
    JointAction a = {1, 0};
    for (double score : disc_forward(p, s.dynamics, 1, a)) EXPECT_DOUBLE_EQ(score, 0.5);
  }
}

TEST(DiscForward, largeWeightSaturatesAndClamps) {
  DiscFixture s = make_setup(2, 3, {2, 2}, 121);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Centralized, 0});
  JointAction a = {0, 0};
  int ja = s.dynamics.encode_action(a);
  p.weights[0][0][ja] = 10.0;
  EXPECT_GE(disc_forward(p, s.dynamics, 0, a)[0], 0.9999);
  p.weights[0][0][ja] = 40.0;
  EXPECT_DOUBLE_EQ(disc_forward(p, s.dynamics, 0, a)[0], 1.0 - 1e-6);  // clamp
  p.weights[0][0][ja] = -40.0;
  EXPECT_DOUBLE_EQ(disc_forward(p, s.dynamics, 0, a)[0], 1e-6);
}

TEST(DiscForward, centralizedScoresIdenticalAcrossAgents) {
  DiscFixture s = make_setup(3, 2, {2, 2, 2}, 122);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Centralized, 0});
  Rng rng(1, "w");
  for (auto& row : p.weights[0])
    for (double& w : row) w = rng.uniform(-2.0, 2.0);
  for (int st = 0; st < 2; ++st)
    for (int ja = 0; ja < s.dynamics.num_joint_actions(); ++ja) {
      JointAction a = s.dynamics.decode_action(ja);
      auto scores = disc_forward(p, s.dynamics, st, a);
      EXPECT_DOUBLE_EQ(scores[0], scores[1]);
      EXPECT_DOUBLE_EQ(scores[1], scores[2]);
    }
}

TEST(DiscForward, decentralizedIgnoresOtherAgentsActions) {
  DiscFixture s = make_setup(2, 3, {2, 3}, 123);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Decentralized, 0});
  Rng rng(2, "w");
  for (auto& table : p.weights)
    for (auto& row : table)
      for (double& w : row) w = rng.uniform(-2.0, 2.0);
  for (int st = 0; st < 3; ++st)
    for (int a0 = 0; a0 < 2; ++a0) {
      JointAction first = {a0, 0};
      double base = disc_forward(p, s.dynamics, st, first)[0];
      for (int a1 = 1; a1 < 3; ++a1) {
        JointAction other = {a0, a1};
        EXPECT_DOUBLE_EQ(disc_forward(p, s.dynamics, st, other)[0], base);
      }
    }
}

TEST(DiscForward, rejectsBadIndices) {
  DiscFixture s = make_setup(2, 3, {2, 2}, 124);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Centralized, 0});
  JointAction a = {0, 0};
  EXPECT_THROW(disc_forward(p, s.dynamics, 7, a), std::out_of_range);
  JointAction bad = {0, 9};
  EXPECT_THROW(disc_forward(p, s.dynamics, 0, bad), std::out_of_range);
}

TEST(DiscUpdate, identicalSidesConvergeToHalf) {
  DiscFixture s = make_setup(2, 3, {2, 2}, 125);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Decentralized, 0});
  DiscBatch batch;
  Rng rng(3, "pairs");
  for (int n = 0; n < 200; ++n) {
    int st = rng.uniform_int(3);
    JointAction a = {rng.uniform_int(2), rng.uniform_int(2)};
    batch.policy_side.emplace_back(st, a);
    batch.expert_side.emplace_back(st, a);
  }
  double obj = disc_update(p, s.dynamics, batch, 1.0, 500);
  // Optimal score is 1/2 on the support, objective per table is 2 log(1/2).
  EXPECT_NEAR(obj, 2.0 * 2.0 * std::log(0.5), 1e-6);
  for (const auto& [st, a] : batch.policy_side)
    for (double score : disc_forward(p, s.dynamics, st, a)) EXPECT_NEAR(score, 0.5, 1e-4);
}

TEST(DiscUpdate, disjointSupportsSeparate) {
  DiscFixture s = make_setup(2, 2, {2, 2}, 126);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Centralized, 0});
  DiscBatch batch;
  JointAction pol = {0, 0}, exp = {1, 1};
  for (int n = 0; n < 50; ++n) {
    batch.policy_side.emplace_back(0, pol);
    batch.expert_side.emplace_back(1, exp);
  }
  double obj = disc_update(p, s.dynamics, batch, 2.0, 4000);
  EXPECT_GT(obj, -1e-3);  // approaches 0 from below under perfect separation
  EXPECT_LE(obj, 0.0);
  EXPECT_GE(disc_forward(p, s.dynamics, 0, pol)[0], 0.999);
  EXPECT_LE(disc_forward(p, s.dynamics, 1, exp)[0], 0.001);
}

TEST(DiscUpdate, convergesToCountRatioPerCell) {
  DiscFixture s = make_setup(2, 3, {2, 2}, 127);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Decentralized, 0});
  Rng rng(4, "pairs");
  DiscBatch batch;
  const int B = 400;
  for (int n = 0; n < B; ++n) {
    int st = rng.uniform_int(3);
    JointAction a = {rng.uniform_int(2), rng.uniform_int(2)};
    batch.policy_side.emplace_back(st, a);
    int st_e = rng.uniform_int(3);
    JointAction a_e = {rng.uniform_int(2), rng.uniform_int(2)};
    batch.expert_side.emplace_back(st_e, a_e);
  }
  disc_update(p, s.dynamics, batch, 2.0, 6000);

  for (int agent = 0; agent < 2; ++agent) {
    std::vector<std::vector<double>> pol_count(3, std::vector<double>(2, 0.0));
    std::vector<std::vector<double>> exp_count(3, std::vector<double>(2, 0.0));
    for (const auto& [st, a] : batch.policy_side) pol_count[st][a[agent]] += 1.0;
    for (const auto& [st, a] : batch.expert_side) exp_count[st][a[agent]] += 1.0;
    for (int o = 0; o < 3; ++o)
      for (int act = 0; act < 2; ++act) {
        double n_pol = pol_count[o][act], n_exp = exp_count[o][act];
        if (n_pol + n_exp == 0.0) continue;
        double ratio = n_pol / (n_pol + n_exp);
        if (ratio <= 0.0 || ratio >= 1.0) continue;  // saturating cells excluded
        double score = sigmoid(p.weights[agent][o][act]);
        EXPECT_NEAR(score, ratio, 1e-3) << "agent " << agent << " cell " << o << "," << act;
      }
  }
}

TEST(DiscUpdate, gradientMatchesFiniteDifferences) {
  DiscFixture s = make_setup(2, 2, {2, 2}, 128);
  Rng rng(5, "pairs");
  DiscBatch batch;
  for (int n = 0; n < 37; ++n) {
    int st = rng.uniform_int(2);
    JointAction a = {rng.uniform_int(2), rng.uniform_int(2)};
    batch.policy_side.emplace_back(st, a);
  }
  for (int n = 0; n < 23; ++n) {
    int st = rng.uniform_int(2);
    JointAction a = {rng.uniform_int(2), rng.uniform_int(2)};
    batch.expert_side.emplace_back(st, a);
  }

  // Independent objective evaluation through disc_forward.
  auto objective = [&](const DiscriminatorParams& p) {
    double total = 0.0;
    for (const auto& [st, a] : batch.policy_side)
      total += std::log(disc_forward(p, s.dynamics, st, a)[0]) / batch.policy_side.size();
    for (const auto& [st, a] : batch.expert_side)
      total += std::log(1.0 - disc_forward(p, s.dynamics, st, a)[0]) / batch.expert_side.size();
    return total;
  };

  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Centralized, 0});
  Rng wrng(6, "w");
  for (auto& row : p.weights[0])
    for (double& w : row) w = wrng.uniform(-1.0, 1.0);

  // One tiny update step approximates lr * gradient on each weight.
  const double lr = 1e-7, h = 1e-5;
  for (int st = 0; st < 2; ++st)
    for (int ja = 0; ja < 4; ++ja) {
      DiscriminatorParams plus = p, minus = p;
      plus.weights[0][st][ja] += h;
      minus.weights[0][st][ja] -= h;
      double fd = (objective(plus) - objective(minus)) / (2.0 * h);
      DiscriminatorParams stepped = p;
      disc_update(stepped, s.dynamics, batch, lr, 1);
      double analytic = (stepped.weights[0][st][ja] - p.weights[0][st][ja]) / lr;
      double scale = std::max({std::abs(fd), std::abs(analytic), 1e-8});
      EXPECT_LE(std::abs(fd - analytic) / scale, 1e-5) << "cell " << st << "," << ja;
    }
}

TEST(DiscUpdate, rejectsEmptySides) {
  DiscFixture s = make_setup(2, 2, {2, 2}, 129);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Centralized, 0});
  DiscBatch batch;
  JointAction a = {0, 0};
  batch.policy_side.emplace_back(0, a);
  EXPECT_THROW(disc_update(p, s.dynamics, batch, 0.5, 1), std::invalid_argument);
}

TEST(PolicyReward, halfScoreGivesLogTwo) {
  DiscFixture s = make_setup(2, 2, {2, 2}, 130);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Decentralized, 0});
  JointAction a = {0, 1};
  auto r = policy_reward(p, {PriorKind::Decentralized, 0}, s.dynamics, 0, a);
  EXPECT_NEAR(r[0], std::log(2.0), 1e-12);
  EXPECT_NEAR(r[1], std::log(2.0), 1e-12);
}

TEST(PolicyReward, saturatedScoreGivesNearZeroReward) {
  DiscFixture s = make_setup(2, 2, {2, 2}, 131);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::Centralized, 0});
  JointAction a = {0, 0};
  p.weights[0][0][s.dynamics.encode_action(a)] = 40.0;  // D clamps to 1 - 1e-6
  auto r = policy_reward(p, {PriorKind::Centralized, 0}, s.dynamics, 0, a);
  EXPECT_NEAR(r[0], 1e-6, 1e-9);  // -log(1 - 1e-6)
  EXPECT_GT(r[0], 0.0);
}

TEST(PolicyReward, zeroSumRewardsNegateExactly) {
  DiscFixture s = make_setup(2, 3, {2, 2}, 132);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::ZeroSum, 0});
  Rng rng(7, "w");
  for (auto& row : p.weights[0])
    for (double& w : row) w = rng.uniform(-3.0, 3.0);
  for (int st = 0; st < 3; ++st)
    for (int ja = 0; ja < 4; ++ja) {
      JointAction a = s.dynamics.decode_action(ja);
      auto r = policy_reward(p, {PriorKind::ZeroSum, 0}, s.dynamics, st, a);
      EXPECT_DOUBLE_EQ(r[0] + r[1], 0.0);
      EXPECT_DOUBLE_EQ(r[0], p.weights[0][st][ja]);
    }
}

TEST(ZeroSumDiscUpdate, identicalSidesLeaveWeightsFixed) {
  DiscFixture s = make_setup(2, 2, {2, 2}, 133);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::ZeroSum, 0});
  std::vector<std::pair<int, JointAction>> side;
  Rng rng(8, "pairs");
  for (int n = 0; n < 60; ++n) {
    JointAction a = {rng.uniform_int(2), rng.uniform_int(2)};
    side.emplace_back(rng.uniform_int(2), a);
  }
  zero_sum_disc_update(p, s.dynamics, side, side, 0.5, 10);
  for (const auto& row : p.weights[0])
    for (double w : row) EXPECT_DOUBLE_EQ(w, 0.0);
}

TEST(ZeroSumDiscUpdate, movesScoreTowardSideAAwayFromSideB) {
  DiscFixture s = make_setup(2, 2, {2, 2}, 134);
  DiscriminatorParams p = DiscriminatorParams::make(s.dynamics, {PriorKind::ZeroSum, 0});
  JointAction a_cell = {0, 0}, b_cell = {1, 1};
  std::vector<std::pair<int, JointAction>> side_a(40, {0, a_cell});
  std::vector<std::pair<int, JointAction>> side_b(40, {1, b_cell});
  zero_sum_disc_update(p, s.dynamics, side_a, side_b, 0.25, 4);
  EXPECT_GT(p.weights[0][0][s.dynamics.encode_action(a_cell)], 0.0);
  EXPECT_LT(p.weights[0][1][s.dynamics.encode_action(b_cell)], 0.0);
}

TEST(ZeroSumDiscUpdate, equilibriumPairedSidesStayBalanced) {
  // Both sides drawn from the same (expert, expert) process: the objective
  // gap stays at sampling-noise scale through training.
  Rng rng(9, "mk");
  MarkovGame g = random_zero_sum_game(3, {2, 2}, 0.9, rng);
  GameDynamics d = strip_rewards(g, ObservationMap::identity(2, 3));
  JointPolicy expert = random_policy(g, ObservationMap::identity(2, 3), rng);
  DiscriminatorParams p = DiscriminatorParams::make(d, {PriorKind::ZeroSum, 0});

  Rng sample_a(10, "a"), sample_b(11, "b");
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<std::pair<int, JointAction>> side_a, side_b;
    for (int e = 0; e < 20; ++e) {
      Trajectory ta = sample_trajectory(d, expert, 25, sample_a);
      Trajectory tb = sample_trajectory(d, expert, 25, sample_b);
      for (int t = 0; t < 25; ++t) {
        side_a.emplace_back(ta.states[t], ta.actions[t]);
        side_b.emplace_back(tb.states[t], tb.actions[t]);
      }
    }
    zero_sum_disc_update(p, d, side_a, side_b, 0.1, 1);
  }
  // Exact expectation of the head under the expert's occupancy is the gap the
  // update chases; with identical side distributions it stays near zero.
  OccupancyTable occ = occupancy_measure(g, expert);
  double mean_v = 0.0;
  for (int s = 0; s < 3; ++s)
    for (int ja = 0; ja < 4; ++ja) mean_v += occ.rho[s][ja] * 0.1 * p.weights[0][s][ja];
  EXPECT_NEAR(mean_v, 0.0, 0.05);
}

TEST(ZeroSumDiscUpdate, rejectsWrongShapes) {
  DiscFixture s2 = make_setup(2, 2, {2, 2}, 135);
  DiscriminatorParams dec = DiscriminatorParams::make(s2.dynamics, {PriorKind::Decentralized, 0});
  std::vector<std::pair<int, JointAction>> side(1, {0, JointAction{0, 0}});
  EXPECT_THROW(zero_sum_disc_update(dec, s2.dynamics, side, side, 0.1, 1), std::invalid_argument);
  DiscriminatorParams zs = DiscriminatorParams::make(s2.dynamics, {PriorKind::ZeroSum, 0});
  std::vector<std::pair<int, JointAction>> empty;
  EXPECT_THROW(zero_sum_disc_update(zs, s2.dynamics, side, empty, 0.1, 1), std::invalid_argument);
}

TEST(DiscriminatorParams, zeroSumRequiresTwoAgents) {
  DiscFixture s = make_setup(3, 2, {2, 2, 2}, 136);
  EXPECT_THROW(DiscriminatorParams::make(s.dynamics, {PriorKind::ZeroSum, 0}),
               std::invalid_argument);
}

}  // namespace
}  // namespace magail
