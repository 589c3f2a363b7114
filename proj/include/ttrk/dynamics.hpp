#pragma once

#include <array>

#include <Eigen/Core>

#include "ttrk/geom.hpp"
#include "ttrk/grid_map.hpp"
#include "ttrk/rng.hpp"

namespace ttrk {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// True target state: position, velocity, and the last well-defined heading.
struct TargetState {
  Vec4 y = Vec4::Zero();  // [y1, y2, vy1, vy2]
  double heading = 0.0;   // atan2 of velocity, retained while nearly stationary

  Vec2 position() const { return y.head<2>(); }
  Vec2 velocity() const { return y.tail<2>(); }
  double speed() const { return y.tail<2>().norm(); }
  bool operator==(const TargetState&) const = default;
};

struct TargetParams {
  double q = 0.5;
  double nu_max = 3.5;
  double r_margin = 1.0;
  double r_min = 1.0;
  double tau = 0.5;
  double search_radius = 20.0;  // closest-obstacle lookup for the repulsion term
};

/// Motion primitive (v [m/s], w [rad/s]).
struct Action {
  double v = 0.0;
  double w = 0.0;
  bool operator==(const Action&) const = default;
};

inline constexpr int kNumActions = 12;

/// Action index = speed_index * 3 + turn_index, speeds {0,1,2,3}, turns {0, -pi/2, pi/2}.
const std::array<Action, kNumActions>& action_set();
inline const Action& action_at(int index) { return action_set().at(index); }
/// Index of an action in the set; throws std::invalid_argument if not a member.
int action_index(const Action& a);

struct SystemMatrices {
  Mat4 A;
  Mat4 W;
};

/// Double-integrator transition and process noise for constant q over period tau.
SystemMatrices system_matrices(double q, double tau);

/// Repulsion angle: pi/2 * (1 + sigmoid(nu - nu_max/2)).
double repulsion_angle(double speed, double nu_max);

/// Heading the repulsion pushes the velocity toward. Returns the target heading
/// unchanged when no obstacle is in range.
double rotated_heading(const TargetState& y, const GridMap& map, const TargetParams& p);

/// Obstacle-repulsion velocity increment [0, 0, a tau cos, a tau sin].
Vec4 zeta(const TargetState& y, const GridMap& map, const TargetParams& p);

struct TargetStep {
  TargetState state;
  bool collided = false;  // candidate landed in an occupied or out-of-map cell
};

/// One target transition. Draws 4 normals for the process noise, then one
/// more only when the candidate position collides.
TargetStep step_target(const TargetState& y, const GridMap& map, const TargetParams& p, Rng& rng);

/// Unnormalized sinc, sinc(0) = 1.
double sinc(double z);

/// Differential-drive update over one period.
Pose2 step_agent(const Pose2& x, const Action& a, double tau);

}  // namespace ttrk
