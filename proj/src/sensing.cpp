#include "ttrk/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ttrk {

RangeBearing range_bearing(const Pose2& x, const Vec2& y_pos) {
  const double dx = y_pos.x() - x.x1;
  const double dy = y_pos.y() - x.x2;
  const double r = std::hypot(dx, dy);
  if (r == 0.0) throw std::invalid_argument("range_bearing: coincident points");
  return {r, wrap_angle(std::atan2(dy, dx) - x.theta)};
}

bool observable(const Pose2& x, const Vec2& y_pos, const GridMap& map, const SensorParams& sp) {
  const double dx = y_pos.x() - x.x1;
  const double dy = y_pos.y() - x.x2;
  const double r = std::hypot(dx, dy);
  if (r == 0.0 || r > sp.r_sensor) return false;
  const double alpha = wrap_angle(std::atan2(dy, dx) - x.theta);
  if (std::abs(alpha) > sp.fov / 2.0) return false;
  if (!map.contains(x.position()) || !map.contains(y_pos)) return false;
  return line_of_sight(map, x.position(), y_pos);
}

std::optional<Measurement> measure(const Pose2& x, const TargetState& y, int target_id,
                                   const GridMap& map, const SensorParams& sp, Rng& rng) {
  if (!observable(x, y.position(), map, sp)) return std::nullopt;
  const RangeBearing z = range_bearing(x, y.position());
  const double nr = rng.normal();
  const double na = rng.normal();
  Measurement m;
  m.target_id = target_id;
  m.r = std::max(1e-6, z.r + std::sqrt(sp.V(0, 0)) * nr);
  m.alpha = wrap_angle(z.alpha + std::sqrt(sp.V(1, 1)) * na);
  return m;
}

std::vector<int> scanned_cells(const Pose2& x, const GridMap& map, const SensorParams& sp) {
  std::vector<int> out;
  if (!map.contains(x.position())) return out;
  const Cell lo = map.cell_unchecked(x.position() - Vec2::Constant(sp.r_sensor));
  const Cell hi = map.cell_unchecked(x.position() + Vec2::Constant(sp.r_sensor));
  for (int iy = std::max(0, lo.iy); iy <= std::min(map.height() - 1, hi.iy); ++iy) {
    for (int ix = std::max(0, lo.ix); ix <= std::min(map.width() - 1, hi.ix); ++ix) {
      if (observable(x, map.cell_center(ix, iy), map, sp)) out.push_back(map.index(ix, iy));
    }
  }
  return out;
}

}  // namespace ttrk
