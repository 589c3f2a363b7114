#pragma once

#include <string>
#include <vector>

#include "ttrk/dynamics.hpp"
#include "ttrk/episode_log.hpp"
#include "ttrk/grid_map.hpp"

namespace ttrk {

/// Obstacles, agent path, true target paths and belief means.
std::string trajectory_svg(const EpisodeLog& log, const GridMap& map);

/// Row-major grid with values in [0, 1]; row 0 drawn at the bottom.
std::string heat_svg(const std::vector<double>& values, int width, int height,
                     const std::string& title);

struct ZetaArrow {
  Vec2 position;
  Vec4 slow;  // zeta at speed 1
  Vec4 fast;  // zeta at speed 3
  Vec2 away;  // unit vector from the closest obstacle cell center to the target
};

struct ZetaField {
  GridMap map;
  TargetParams params;
  double heading = 0.0;
  std::vector<ZetaArrow> arrows;  // free cells with an obstacle in range

  /// Every arrow points away from its obstacle (dot product >= 0).
  bool directions_ok() const;
  /// |zeta| at speed 3 is never below |zeta| at speed 1.
  bool magnitudes_ok() const;
};

/// Small map with one block obstacle, target heading -3pi/4, sampled at
/// every free cell center near the block.
ZetaField compute_zeta_field();
std::string zeta_field_svg(const ZetaField& field);

}  // namespace ttrk
