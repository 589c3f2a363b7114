#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ttrk/belief.hpp"
#include "ttrk/dynamics.hpp"
#include "ttrk/env.hpp"
#include "ttrk/rng.hpp"

namespace ttrk {

struct PlannerConfig {
  int horizon = 12;
  int execute_steps = 5;
  std::int64_t node_budget = 20000;  // expansions; kUnlimited for exhaustive runs
  std::optional<double> wall_seconds;  // extra wall-clock stop, off by default
  double prune_cell = 1.0;  // bucket size in meters; <= 0 disables pruning

  static constexpr std::int64_t kUnlimited = std::numeric_limits<std::int64_t>::max();
  void validate() const;
};

struct PlanResult {
  std::vector<int> actions;  // length execute_steps, padded with stop
  std::vector<int> path;     // full chosen path
  double objective = 0.0;    // guaranteed full-horizon objective of the chosen path
  std::int64_t nodes_expanded = 0;
  std::int64_t nodes_generated = 0;
};

/// One step of the covariance-only rollout: correct at the predicted mean if
/// it is observable from `pose`, then predict. Returns the predicted covariance.
Mat4 covariance_step(const Mat4& predicted_cov, const Vec4& predicted_mean, const Pose2& pose,
                     const GridMap& map, const SensorParams& sensor, const Mat4& A, const Mat4& W);

/// Predicted covariances along a pose sequence, one per pose. Means follow
/// A without any measurement influence.
std::vector<Mat4> simulate_covariance(const Belief& predicted, const std::vector<Pose2>& poses,
                                      const GridMap& map, const SensorParams& sensor, const Mat4& A,
                                      const Mat4& W);

/// Sum over steps and targets of -log det of the predicted covariance for an
/// action sequence. Returns nothing if any step is blocked.
std::optional<double> sequence_objective(const Snapshot& snap, const std::vector<int>& actions);

/// Agent pose after an action, or nothing when the move is blocked.
std::optional<Pose2> try_move(const Pose2& pose, int action, const GridMap& map, double r_margin,
                              double tau);

/// Best-first anytime search over motion-primitive sequences.
PlanResult plan(const Snapshot& snap, const PlannerConfig& cfg);

/// Depth-one maximization of the same objective; ties go to the lowest index.
int greedy_policy(const Snapshot& snap);

int random_policy(Rng& rng);

}  // namespace ttrk
