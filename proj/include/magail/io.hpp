#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "magail/game.hpp"

namespace magail {

/// Decode failure with the 1-based line number where parsing stopped.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& msg, int line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Formats a double with 12 significant digits.
inline std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// Writes contents to a temp file in the same directory, then renames over
/// the target so readers never observe a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("atomic_write: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Demonstration codec
//
// Line-delimited text. The header line is
//   game_id N |S| horizon M seed
// and each following line is one trajectory flattened as
//   s_0 a_0^1 ... a_0^N s_1 a_1^1 ... a_1^N ...
// in decimal ASCII with single-space separators. Token order is normative.
// ---------------------------------------------------------------------------

inline std::string encode_demonstrations(const DemonstrationSet& d) {
  std::ostringstream out;
  out << d.game_id << ' ' << d.num_agents << ' ' << d.num_states << ' ' << d.horizon << ' '
      << d.num_episodes() << ' ' << d.seed << '\n';
  for (const Trajectory& traj : d.trajectories) {
    for (int t = 0; t < traj.horizon(); ++t) {
      if (t > 0) out << ' ';
      out << traj.states[t];
      for (int a : traj.actions[t]) out << ' ' << a;
    }
    out << '\n';
  }
  return out.str();
}

inline DemonstrationSet decode_demonstrations(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) throw DecodeError("missing header", 1);
  ++line_no;
  DemonstrationSet d;
  long episodes = 0;
  {
    std::istringstream hs(line);
    if (!(hs >> d.game_id >> d.num_agents >> d.num_states >> d.horizon >> episodes >> d.seed))
      throw DecodeError("malformed header", line_no);
    if (d.num_agents <= 0 || d.num_states <= 0 || d.horizon < 0 || episodes < 0)
      throw DecodeError("header fields out of range", line_no);
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Trajectory traj;
    for (int t = 0; t < d.horizon; ++t) {
      int s;
      if (!(ls >> s)) throw DecodeError("truncated trajectory", line_no);
      if (s < 0 || s >= d.num_states) throw DecodeError("state index out of range", line_no);
      JointAction a(d.num_agents);
      for (int i = 0; i < d.num_agents; ++i)
        if (!(ls >> a[i])) throw DecodeError("truncated trajectory", line_no);
      traj.states.push_back(s);
      traj.actions.push_back(a);
    }
    int extra;
    if (ls >> extra) throw DecodeError("trailing tokens", line_no);
    d.trajectories.push_back(std::move(traj));
  }
  if (d.num_episodes() != episodes)
    throw DecodeError("episode count mismatch: header says " + std::to_string(episodes) +
                          ", found " + std::to_string(d.num_episodes()),
                      line_no);
  return d;
}

inline void write_demonstrations(const std::filesystem::path& path, const DemonstrationSet& d) {
  atomic_write(path, encode_demonstrations(d));
}

inline DemonstrationSet read_demonstrations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open demonstration file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_demonstrations(buf.str());
}

// ---------------------------------------------------------------------------
// Policy tables
//
// Decimal text, row-major, 12 significant digits. Each agent block records
// whether its rows are indexed by raw states or by the environment's
// observations, so solver experts (full state) and learned policies
// (observation-restricted) round-trip through the same format.
// ---------------------------------------------------------------------------

inline std::string encode_policy(const JointPolicy& pi, const ObservationMap& env_obs) {
  std::ostringstream out;
  out << "policy-table 1\n";
  out << "agents " << pi.num_agents() << '\n';
  for (int i = 0; i < pi.num_agents(); ++i) {
    const auto& table = pi.agents[i].probs;
    bool env_mapped = pi.obs.state_to_obs[i] == env_obs.state_to_obs[i] &&
                      pi.obs.observation_counts[i] == env_obs.observation_counts[i];
    out << "agent " << i << " rows " << table.size() << " cols "
        << (table.empty() ? 0 : table[0].size()) << " map " << (env_mapped ? "env" : "state")
        << '\n';
    for (const auto& row : table) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j > 0) out << ' ';
        out << fmt12(row[j]);
      }
      out << '\n';
    }
  }
  return out.str();
}

inline JointPolicy decode_policy(const std::string& text, const ObservationMap& env_obs,
                                 int num_states) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw DecodeError("unexpected end of policy file", line_no + 1);
    ++line_no;
  };

  next_line();
  if (line != "policy-table 1") throw DecodeError("bad policy file magic", line_no);
  next_line();
  int n = 0;
  if (std::sscanf(line.c_str(), "agents %d", &n) != 1 || n <= 0)
    throw DecodeError("bad agent count", line_no);

  JointPolicy pi;
  pi.obs.observation_counts.resize(n);
  pi.obs.state_to_obs.resize(n);
  for (int i = 0; i < n; ++i) {
    next_line();
    int agent = 0, rows = 0, cols = 0;
    char map_kind[16] = {0};
    if (std::sscanf(line.c_str(), "agent %d rows %d cols %d map %15s", &agent, &rows, &cols,
                    map_kind) != 4 ||
        agent != i || rows <= 0 || cols <= 0)
      throw DecodeError("bad agent header", line_no);
    std::string kind = map_kind;
    if (kind == "env") {
      if (env_obs.observation_counts[i] != rows)
        throw DecodeError("policy rows do not match environment observations", line_no);
      pi.obs.observation_counts[i] = env_obs.observation_counts[i];
      pi.obs.state_to_obs[i] = env_obs.state_to_obs[i];
    } else if (kind == "state") {
      if (rows != num_states)
        throw DecodeError("state-mapped policy rows do not match state count", line_no);
      pi.obs.observation_counts[i] = num_states;
      pi.obs.state_to_obs[i].resize(num_states);
      for (int s = 0; s < num_states; ++s) pi.obs.state_to_obs[i][s] = s;
    } else {
      throw DecodeError("unknown observation map kind '" + kind + "'", line_no);
    }
    AgentPolicy ap;
    ap.probs.assign(rows, std::vector<double>(cols, 0.0));
    for (int r = 0; r < rows; ++r) {
      next_line();
      std::istringstream ls(line);
      for (int c = 0; c < cols; ++c)
        if (!(ls >> ap.probs[r][c])) throw DecodeError("truncated policy row", line_no);
    }
    pi.agents.push_back(std::move(ap));
  }
  return pi;
}

inline void write_policy(const std::filesystem::path& path, const JointPolicy& pi,
                         const ObservationMap& env_obs) {
  atomic_write(path, encode_policy(pi, env_obs));
}

inline JointPolicy read_policy(const std::filesystem::path& path, const ObservationMap& env_obs,
                               int num_states) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open policy file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_policy(buf.str(), env_obs, num_states);
}

// ---------------------------------------------------------------------------
// Discriminator checkpoints
//
// Decimal text, one cell per line: "agent obs action weight". Shared heads
// (centralized and zero-sum scorers over states and joint actions) use agent
// index -1.
// ---------------------------------------------------------------------------

inline std::string encode_discriminator_cells(
    const std::vector<std::vector<std::vector<double>>>& weights, bool shared_head) {
  std::ostringstream out;
  out << "disc-table 1\n";
  out << "tables " << weights.size() << (shared_head ? " shared" : " per-agent") << '\n';
  for (std::size_t tbl = 0; tbl < weights.size(); ++tbl) {
    int agent = shared_head ? -1 : static_cast<int>(tbl);
    for (std::size_t o = 0; o < weights[tbl].size(); ++o)
      for (std::size_t a = 0; a < weights[tbl][o].size(); ++a)
        out << agent << ' ' << o << ' ' << a << ' ' << fmt12(weights[tbl][o][a]) << '\n';
  }
  return out.str();
}

/// Reads the cells back into tables shaped like `reference` (same prior).
inline std::vector<std::vector<std::vector<double>>> decode_discriminator_cells(
    const std::string& text, const std::vector<std::vector<std::vector<double>>>& reference) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line) || line != "disc-table 1")
    throw DecodeError("bad discriminator file magic", 1);
  ++line_no;
  if (!std::getline(in, line)) throw DecodeError("missing table count", 2);
  ++line_no;
  auto weights = reference;
  for (auto& tbl : weights)
    for (auto& row : tbl) std::fill(row.begin(), row.end(), 0.0);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int agent, obs, action;
    double w;
    if (!(ls >> agent >> obs >> action >> w)) throw DecodeError("malformed cell", line_no);
    int tbl = agent < 0 ? 0 : agent;
    if (tbl >= static_cast<int>(weights.size()) ||
        obs >= static_cast<int>(weights[tbl].size()) ||
        action >= static_cast<int>(weights[tbl][obs].size()))
      throw DecodeError("cell index out of range", line_no);
    weights[tbl][obs][action] = w;
  }
  return weights;
}

// ---------------------------------------------------------------------------
// CSV helper
// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  explicit CsvWriter(std::string header) { out_ << header << '\n'; }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }
  void save(const std::filesystem::path& path) const { atomic_write(path, str()); }

 private:
  std::ostringstream out_;
};

}  // namespace magail
