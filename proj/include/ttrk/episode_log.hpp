#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ttrk/belief.hpp"
#include "ttrk/dynamics.hpp"
#include "ttrk/geom.hpp"
#include "ttrk/sensing.hpp"

namespace ttrk {

struct TargetRecord {
  Vec4 true_state = Vec4::Zero();
  Belief posterior;  // after the measurement update at this step
  Belief predicted;  // one step ahead of the posterior
  std::optional<Measurement> measurement;
};

struct StepRecord {
  int t = 0;  // 1-based step index
  Pose2 pose;  // agent pose after the action
  int action = 0;
  std::vector<TargetRecord> targets;
  double reward = 0.0;
  bool collision_attempt = false;
  int scanned_count = 0;
  nlohmann::json info;  // optional policy diagnostics, null when absent
};

struct EpisodeHeader {
  nlohmann::json config;
  std::uint64_t scenario_seed = 0;
  std::uint64_t noise_seed = 0;
  std::uint64_t map_seed = 0;
  Pose2 initial_pose;
  std::vector<Vec4> initial_targets;
  std::vector<Belief> initial_beliefs;  // before the first prediction
  int initial_scanned_count = 0;
};

/// Complete per-step record of one episode; every offline metric is a
/// function of this alone.
struct EpisodeLog {
  EpisodeHeader header;
  std::vector<StepRecord> steps;

  int n_targets() const { return static_cast<int>(header.initial_beliefs.size()); }
  /// Observed flags of one target, one entry per step.
  std::vector<bool> observed_flags(int target) const;
};

/// JSON-lines: a header record followed by one record per step. Matrices are row-major.
std::string to_jsonl(const EpisodeLog& log);
EpisodeLog episode_log_from_jsonl(std::istream& in);
void write_episode_log(const EpisodeLog& log, const std::string& path);
EpisodeLog read_episode_log(const std::string& path);

}  // namespace ttrk
