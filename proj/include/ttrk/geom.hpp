#pragma once

#include <numbers>
#include <optional>

#include "ttrk/grid_map.hpp"

namespace ttrk {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

/// SE(2) pose; theta kept in [-pi, pi).
struct Pose2 {
  double x1 = 0.0;
  double x2 = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x1, x2}; }
  bool operator==(const Pose2&) const = default;
};

struct Polar {
  double r = 0.0;
  double angle = 0.0;
};

/// Global point expressed in the frame's coordinates.
Vec2 to_frame(const Vec2& point, const Pose2& frame);
/// Inverse of to_frame.
Vec2 from_frame(const Vec2& local, const Pose2& frame);
/// Rotates a free vector (e.g. a velocity) into the frame.
Vec2 rotate_into(const Vec2& v, double theta);

/// Grid traversal test between two points. The cells containing the two
/// endpoints are ignored, so the relation is symmetric. Throws
/// std::out_of_range when an endpoint is outside the map.
bool line_of_sight(const GridMap& map, const Vec2& a, const Vec2& b);

/// Nearest occupied cell center within `search_radius` of the pose, in the
/// pose frame. Cells beyond the map border count as occupied. Ties go to the
/// smallest (row, column) cell.
std::optional<Polar> closest_obstacle(const GridMap& map, const Pose2& pose, double search_radius);

}  // namespace ttrk
