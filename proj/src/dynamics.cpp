#include "ttrk/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace ttrk {

namespace {
constexpr double kStationarySpeed = 1e-6;

// Noise factor L with L L^T = W(q) / q, per axis pair (position, velocity).
struct NoiseFactor {
  double l11, l21, l22;
};

NoiseFactor unit_noise_factor(double tau) {
  const double l11 = std::sqrt(tau * tau * tau / 3.0);
  const double l21 = (tau * tau / 2.0) / l11;
  const double l22 = std::sqrt(tau - l21 * l21);
  return {l11, l21, l22};
}

void clamp_speed(Vec4& y, double nu_max) {
  const double s = y.tail<2>().norm();
  if (s > nu_max) y.tail<2>() *= nu_max / s;
}

double heading_of(const Vec4& y, double previous) {
  if (y.tail<2>().norm() < kStationarySpeed) return previous;
  return std::atan2(y(3), y(2));
}
}  // namespace

const std::array<Action, kNumActions>& action_set() {
  static const std::array<Action, kNumActions> set = [] {
    std::array<Action, kNumActions> a{};
    const double speeds[] = {0.0, 1.0, 2.0, 3.0};
    const double turns[] = {0.0, -kPi / 2, kPi / 2};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) a[i * 3 + j] = Action{speeds[i], turns[j]};
    }
    return a;
  }();
  return set;
}

int action_index(const Action& a) {
  const auto& set = action_set();
  for (int i = 0; i < kNumActions; ++i) {
    if (set[i] == a) return i;
  }
  throw std::invalid_argument("action not in the motion-primitive set");
}

SystemMatrices system_matrices(double q, double tau) {
  SystemMatrices m;
  m.A.setIdentity();
  m.A(0, 2) = tau;
  m.A(1, 3) = tau;
  const double pp = q * tau * tau * tau / 3.0;
  const double pv = q * tau * tau / 2.0;
  const double vv = q * tau;
  m.W.setZero();
  m.W(0, 0) = m.W(1, 1) = pp;
  m.W(2, 2) = m.W(3, 3) = vv;
  m.W(0, 2) = m.W(2, 0) = pv;
  m.W(1, 3) = m.W(3, 1) = pv;
  return m;
}

double repulsion_angle(double speed, double nu_max) {
  return kPi / 2.0 * (1.0 + 1.0 / (1.0 + std::exp(-(speed - nu_max / 2.0))));
}

namespace {
struct Repulsion {
  double accel = 0.0;
  double heading = 0.0;
};

Repulsion repulsion(const TargetState& y, const GridMap& map, const TargetParams& p) {
  const Pose2 frame{y.y(0), y.y(1), y.heading};
  const auto obstacle = closest_obstacle(map, frame, p.search_radius);
  if (!obstacle) return {0.0, y.heading};
  const double speed = y.speed();
  const double theta_rep = repulsion_angle(speed, p.nu_max);
  const double theta_rot = obstacle->angle >= 0.0 ? y.heading + obstacle->angle - theta_rep
                                                  : y.heading + obstacle->angle + theta_rep;
  const double cos_plus = std::abs(obstacle->angle) <= kPi / 2 ? std::cos(obstacle->angle) : 0.0;
  const double dist = std::max(p.r_min, obstacle->r - p.r_margin);
  return {speed * cos_plus / (dist * dist), theta_rot};
}
}  // namespace

double rotated_heading(const TargetState& y, const GridMap& map, const TargetParams& p) {
  return repulsion(y, map, p).heading;
}

Vec4 zeta(const TargetState& y, const GridMap& map, const TargetParams& p) {
  const Repulsion rep = repulsion(y, map, p);
  Vec4 z = Vec4::Zero();
  if (rep.accel == 0.0) return z;
  z(2) = rep.accel * p.tau * std::cos(rep.heading);
  z(3) = rep.accel * p.tau * std::sin(rep.heading);
  return z;
}

TargetStep step_target(const TargetState& y, const GridMap& map, const TargetParams& p, Rng& rng) {
  const SystemMatrices sys = system_matrices(p.q, p.tau);
  const NoiseFactor f = unit_noise_factor(p.tau);
  const double sq = std::sqrt(p.q);
  std::array<double, 4> n{};
  for (auto& v : n) v = rng.normal();
  // Noise drawn as (pos1, pos2, vel1, vel2) standard normals, correlated per axis.
  Vec4 w;
  w(0) = sq * f.l11 * n[0];
  w(1) = sq * f.l11 * n[1];
  w(2) = sq * (f.l21 * n[0] + f.l22 * n[2]);
  w(3) = sq * (f.l21 * n[1] + f.l22 * n[3]);

  const Repulsion rep = repulsion(y, map, p);
  Vec4 rep_term = Vec4::Zero();
  if (rep.accel != 0.0) {
    rep_term(2) = rep.accel * p.tau * std::cos(rep.heading);
    rep_term(3) = rep.accel * p.tau * std::sin(rep.heading);
  }

  TargetStep out;
  Vec4 candidate = sys.A * y.y + w + rep_term;
  if (!map.occupied_at(candidate.head<2>())) {
    clamp_speed(candidate, p.nu_max);
    out.state.y = candidate;
    out.state.heading = heading_of(candidate, y.heading);
    return out;
  }

  out.collided = true;
  const double speed = y.speed() + rng.normal();
  Vec4 fallback = y.y;
  fallback(2) = speed * std::cos(rep.heading);
  fallback(3) = speed * std::sin(rep.heading);
  clamp_speed(fallback, p.nu_max);
  out.state.y = fallback;
  out.state.heading = heading_of(fallback, y.heading);
  return out;
}

double sinc(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - z * z / 6.0;
  return std::sin(z) / z;
}

Pose2 step_agent(const Pose2& x, const Action& a, double tau) {
  const double half = a.w * tau / 2.0;
  const double dist = a.v * tau * sinc(half);
  return {x.x1 + dist * std::cos(x.theta + half), x.x2 + dist * std::sin(x.theta + half),
          wrap_angle(x.theta + tau * a.w)};
}

}  // namespace ttrk
