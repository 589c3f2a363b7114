#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ttrk/belief.hpp"
#include "ttrk/dynamics.hpp"
#include "ttrk/episode_log.hpp"
#include "ttrk/geom.hpp"
#include "ttrk/rng.hpp"
#include "ttrk/sensing.hpp"
#include "ttrk/worldmap.hpp"

namespace ttrk {

enum class Task { insight, navigation, discovery, random };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

struct EnvConfig {
  int n_targets = 1;
  int horizon = 100;  // steps per episode
  TargetParams target;  // true target model (q, nu_max, tau, r_margin, r_min)
  BeliefParams belief;  // agent-side model (q_b, initial covariance)
  SensorParams sensor;
  Task task = Task::random;
  double penalty = 2.0;
  bool move_after_first_obs = false;
  std::string obstacle_set = "train";
  int n_obstacles = 4;
  double visit_decay = 0.95;   // c_f in the visit-frequency decay
  std::optional<std::uint64_t> map_seed;  // overrides the episode-derived map seed

  double tau() const { return target.tau; }
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

nlohmann::json to_json(const EnvConfig& cfg);
EnvConfig env_config_from_json(const nlohmann::json& j);

/// Egocentric maps plus the non-geographic feature vector.
struct RLState {
  EgoStack maps;
  /// Per target: relative predicted position (2), rotated predicted velocity
  /// (2), log det of predicted covariance, observed flag; then the closest
  /// obstacle (r, angle).
  std::vector<double> phi;
  bool operator==(const RLState&) const = default;
};

inline int phi_size(int n_targets) { return 6 * n_targets + 2; }

struct StepInfo {
  std::vector<bool> observed;
  bool collision_attempt = false;
  std::vector<double> logdet;  // per-target posterior log det
};

struct StepResult {
  RLState state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// -sum_i log det(cov_i), minus the penalty on a collision attempt.
double compute_reward(const std::vector<Belief>& posteriors, bool collision_attempt, double penalty);

/// Feature vector for predicted beliefs seen from the pose.
std::vector<double> build_phi(const std::vector<Belief>& predicted, const Pose2& pose,
                              const std::vector<bool>& observed, const GridMap& map,
                              double r_sensor);

/// Everything a planner needs to look ahead from the current step.
struct Snapshot {
  Pose2 pose;
  std::shared_ptr<const GridMap> map;
  std::vector<Belief> predicted;  // beliefs for the next time step
  SensorParams sensor;
  Mat4 A;
  Mat4 W;  // belief-model process noise
  double tau = 0.5;
  double r_margin = 1.0;
};

/// Reset/step simulation of one agent tracking N targets.
class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  /// New episode; map, initial placement, and noise all derive from `seed`.
  RLState reset(std::uint64_t seed);
  /// Scenario (map, placement) from one seed; target and sensor noise from another.
  RLState reset(std::uint64_t scenario_seed, std::uint64_t noise_seed);

  StepResult step(const Action& a);
  StepResult step(int action_index) { return step(action_at(action_index)); }

  const EnvConfig& config() const { return cfg_; }
  const GridMap& map() const { return *map_; }
  std::shared_ptr<const GridMap> shared_map() const { return map_; }
  const VisitGrid& visit_grid() const { return *visit_; }
  const Pose2& pose() const { return pose_; }
  const std::vector<TargetState>& targets() const { return targets_; }
  const std::vector<Belief>& predicted_beliefs() const { return predicted_; }
  const std::vector<Belief>& posterior_beliefs() const { return posterior_; }
  const RLState& state() const { return state_; }
  int t() const { return t_; }
  bool done() const { return t_ >= cfg_.horizon; }
  std::uint64_t map_seed() const { return map_seed_; }

  Snapshot snapshot() const;

  const EpisodeLog& log() const { return log_; }
  /// Attaches planner diagnostics to the most recent step record.
  void annotate_last_step(const nlohmann::json& info);

 private:
  void place_entities(Rng& rng);
  RLState assemble_state() const;
  double mean_belief_speed() const;

  EnvConfig cfg_;
  SystemMatrices true_sys_;
  SystemMatrices belief_sys_;
  std::shared_ptr<const GridMap> map_;
  std::unique_ptr<VisitGrid> visit_;
  Pose2 pose_;
  std::vector<TargetState> targets_;
  std::vector<Belief> posterior_;
  std::vector<Belief> predicted_;
  std::vector<bool> observed_;
  std::vector<bool> ever_observed_;
  Rng target_rng_;
  Rng sensor_rng_;
  RLState state_;
  int t_ = 0;
  bool active_ = false;
  std::uint64_t map_seed_ = 0;
  EpisodeLog log_;
};

}  // namespace ttrk
