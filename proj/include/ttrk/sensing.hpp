#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "ttrk/dynamics.hpp"
#include "ttrk/geom.hpp"
#include "ttrk/grid_map.hpp"
#include "ttrk/rng.hpp"

namespace ttrk {

using Mat2 = Eigen::Matrix2d;

struct SensorParams {
  double r_sensor = 10.0;
  double fov = 2.0 * kPi / 3.0;
  Mat2 V = (Mat2() << 0.2, 0.0, 0.0, 0.01).finished();
};

struct Measurement {
  int target_id = 0;
  double r = 0.0;
  double alpha = 0.0;
  bool operator==(const Measurement&) const = default;
};

struct RangeBearing {
  double r = 0.0;
  double alpha = 0.0;
};

/// Range and bearing of a point seen from the pose. Throws
/// std::invalid_argument for coincident points.
RangeBearing range_bearing(const Pose2& x, const Vec2& y_pos);

/// Inside range, inside the field of view, and not occluded. A point at the
/// sensor itself is not observable.
bool observable(const Pose2& x, const Vec2& y_pos, const GridMap& map, const SensorParams& sp);

/// Noisy range-bearing reading, or nothing when the target is not observable.
/// Draws range noise then bearing noise, only when observable.
std::optional<Measurement> measure(const Pose2& x, const TargetState& y, int target_id,
                                   const GridMap& map, const SensorParams& sp, Rng& rng);

/// Row-major indices of every cell whose center is observable, ascending.
std::vector<int> scanned_cells(const Pose2& x, const GridMap& map, const SensorParams& sp);

}  // namespace ttrk
