#pragma once

#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>

#include "magail/envs.hpp"
#include "magail/imitation.hpp"
#include "magail/mack.hpp"

namespace magail {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DemoConfig {
  int episodes = 100;
  int horizon = 50;
};

struct EvalConfig {
  int episodes = 100;
  int horizon = 100;
};

/// One experiment: game + expert method + demo shape + imitation method.
struct ExperimentConfig {
  std::string game_tag;
  GridSpec grid;
  std::string expert_method = "team_vi";  // team_vi | zerosum_shapley | mack
  double expert_tol = 1e-6;
  MackConfig expert_mack;
  DemoConfig demos;
  std::string imitation_method = "magail_c";  // bc | gail | magail_c | magail_d | magail_zs
  MagailConfig magail;
  EvalConfig evaluation;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/out";
  json raw;  // snapshot of the parsed document
};

namespace detail_json {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
  }
}

inline void read_grid(const json& j, GridSpec& g) {
  read_field(j, "width", g.width);
  read_field(j, "height", g.height);
  read_field(j, "num_agents", g.num_agents);
  read_field(j, "num_landmarks", g.num_landmarks);
  read_field(j, "collision_penalty", g.collision_penalty);
  read_field(j, "step_penalty", g.step_penalty);
  read_field(j, "goal_reward", g.goal_reward);
  read_field(j, "discount", g.discount);
  read_field(j, "randomize_layout", g.randomize_layout);
  read_field(j, "layout_seed", g.layout_seed);
  read_field(j, "layout_variants", g.layout_variants);
  read_field(j, "predator_move_prob", g.predator_move_prob);
}

inline void read_mack(const json& j, MackConfig& m) {
  read_field(j, "advantage_horizon", m.advantage_horizon);
  read_field(j, "policy_lr", m.policy_lr);
  read_field(j, "baseline_lr", m.baseline_lr);
  read_field(j, "linear_lr_decay", m.linear_lr_decay);
  read_field(j, "batch_size", m.batch_size);
  read_field(j, "rollout_horizon", m.rollout_horizon);
  read_field(j, "iterations", m.iterations);
  read_field(j, "entropy_coef", m.entropy_coef);
  read_field(j, "fisher_damping", m.fisher_damping);
}

inline void read_magail(const json& j, MagailConfig& m) {
  if (j.contains("generator")) read_mack(j.at("generator"), m.generator);
  read_field(j, "disc_lr", m.disc_lr);
  read_field(j, "disc_steps", m.disc_steps);
  read_field(j, "outer_iterations", m.outer_iterations);
  read_field(j, "bc_pretrain", m.bc_pretrain);
  read_field(j, "bc_alpha", m.bc_alpha);
  read_field(j, "entropy_coef", m.entropy_coef);
  read_field(j, "eval_every", m.eval_every);
}

}  // namespace detail_json

inline ExperimentConfig parse_experiment_config(const json& j) {
  using detail_json::read_field;
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
    throw ConfigError("config must declare schema_version 1");
  if (!j.contains("seed")) throw ConfigError("config must pin a seed");
  if (!j.contains("game") || !j.at("game").contains("tag"))
    throw ConfigError("config must name game.tag");

  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  read_field(j, "out_dir", cfg.out_dir);
  cfg.game_tag = j.at("game").at("tag").get<std::string>();
  bool known = false;
  for (const std::string& tag : env_tags()) known = known || tag == cfg.game_tag;
  if (!known) throw ConfigError("unknown game.tag '" + cfg.game_tag + "'");
  if (j.at("game").contains("spec")) detail_json::read_grid(j.at("game").at("spec"), cfg.grid);

  if (j.contains("expert")) {
    const json& e = j.at("expert");
    read_field(e, "method", cfg.expert_method);
    read_field(e, "tol", cfg.expert_tol);
    if (e.contains("mack")) detail_json::read_mack(e.at("mack"), cfg.expert_mack);
  }
  if (cfg.expert_method != "team_vi" && cfg.expert_method != "zerosum_shapley" &&
      cfg.expert_method != "mack" && cfg.expert_method != "analytic")
    throw ConfigError("unknown expert.method '" + cfg.expert_method + "'");
  if (cfg.expert_method == "analytic" && cfg.game_tag != "coop_comm")
    throw ConfigError("expert.method analytic is defined for coop_comm only");

  if (j.contains("demos")) {
    read_field(j.at("demos"), "episodes", cfg.demos.episodes);
    read_field(j.at("demos"), "horizon", cfg.demos.horizon);
  }
  if (j.contains("imitation")) {
    const json& im = j.at("imitation");
    read_field(im, "method", cfg.imitation_method);
    if (im.contains("magail")) detail_json::read_magail(im.at("magail"), cfg.magail);
    read_field(im, "bc_alpha", cfg.magail.bc_alpha);
  }
  const std::string& m = cfg.imitation_method;
  if (m != "bc" && m != "gail" && m != "magail_c" && m != "magail_d" && m != "magail_zs")
    throw ConfigError("unknown imitation.method '" + m + "'");
  if (j.contains("evaluation")) {
    read_field(j.at("evaluation"), "episodes", cfg.evaluation.episodes);
    read_field(j.at("evaluation"), "horizon", cfg.evaluation.horizon);
  }

  cfg.magail.seed = cfg.seed;
  cfg.expert_mack.seed = cfg.seed;
  cfg.expert_mack.stream = "expert.mack";
  if (m == "magail_c") cfg.magail.prior.kind = PriorKind::Centralized;
  if (m == "magail_d" || m == "gail") cfg.magail.prior.kind = PriorKind::Decentralized;
  if (m == "magail_zs") cfg.magail.prior.kind = PriorKind::ZeroSum;
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_experiment_config(j);
}

}  // namespace magail
