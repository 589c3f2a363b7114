#include "ttrk/geom.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ttrk {

double wrap_angle(double a) {
  if (a >= -kPi && a < kPi) return a;
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  w -= kPi;
  if (w >= kPi) w -= 2.0 * kPi;
  if (w < -kPi) w = -kPi;
  return w;
}

Vec2 rotate_into(const Vec2& v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x() + s * v.y(), -s * v.x() + c * v.y()};
}

Vec2 to_frame(const Vec2& point, const Pose2& frame) {
  return rotate_into(point - frame.position(), frame.theta);
}

Vec2 from_frame(const Vec2& local, const Pose2& frame) {
  const double c = std::cos(frame.theta);
  const double s = std::sin(frame.theta);
  return {frame.x1 + c * local.x() - s * local.y(), frame.x2 + s * local.x() + c * local.y()};
}

bool line_of_sight(const GridMap& map, const Vec2& a, const Vec2& b) {
  const auto start = map.cell_of(a);
  const auto end = map.cell_of(b);
  if (!start || !end) {
    throw std::out_of_range("line_of_sight: endpoint outside map");
  }
  if (*start == *end) return true;

  const Vec2 d = b - a;
  const double res = map.resolution();
  const Vec2& o = map.origin();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  const int step_x = d.x() > 0.0 ? 1 : (d.x() < 0.0 ? -1 : 0);
  const int step_y = d.y() > 0.0 ? 1 : (d.y() < 0.0 ? -1 : 0);
  // Parametric distance (t in [0,1]) to the next vertical/horizontal cell border.
  double t_max_x = kInf, t_delta_x = kInf;
  double t_max_y = kInf, t_delta_y = kInf;
  if (step_x != 0) {
    const double border = o.x() + (start->ix + (step_x > 0 ? 1 : 0)) * res;
    t_max_x = (border - a.x()) / d.x();
    t_delta_x = res / std::abs(d.x());
  }
  if (step_y != 0) {
    const double border = o.y() + (start->iy + (step_y > 0 ? 1 : 0)) * res;
    t_max_y = (border - a.y()) / d.y();
    t_delta_y = res / std::abs(d.y());
  }

  int ix = start->ix;
  int iy = start->iy;
  const int max_steps = std::abs(end->ix - ix) + std::abs(end->iy - iy) + 2;
  for (int i = 0; i < max_steps; ++i) {
    if (std::min(t_max_x, t_max_y) > 1.0) break;
    if (t_max_x < t_max_y) {
      ix += step_x;
      t_max_x += t_delta_x;
    } else if (t_max_y < t_max_x) {
      iy += step_y;
      t_max_y += t_delta_y;
    } else {
      // Exactly through a grid vertex: the side cells are only touched at a point.
      ix += step_x;
      iy += step_y;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
    }
    if (ix == end->ix && iy == end->iy) return true;
    if (map.occupied(ix, iy)) return false;
  }
  return true;
}

std::optional<Polar> closest_obstacle(const GridMap& map, const Pose2& pose, double search_radius) {
  const Vec2 p = pose.position();
  const Cell c0 = map.cell_unchecked(p);
  const double res = map.resolution();
  const int max_ring = static_cast<int>(std::ceil(search_radius / res)) + 1;
  const double radius_sq = search_radius * search_radius;

  bool found = false;
  double best_sq = std::numeric_limits<double>::infinity();
  Cell best_cell{};
  Vec2 best_center = Vec2::Zero();

  auto visit = [&](int ix, int iy) {
    if (!map.occupied(ix, iy)) return;
    const Vec2 center = map.cell_center(ix, iy);
    const double dsq = (center - p).squaredNorm();
    if (dsq > radius_sq) return;
    const bool earlier = iy < best_cell.iy || (iy == best_cell.iy && ix < best_cell.ix);
    if (!found || dsq < best_sq || (dsq == best_sq && earlier)) {
      found = true;
      best_sq = dsq;
      best_cell = {ix, iy};
      best_center = center;
    }
  };

  for (int k = 0; k <= max_ring; ++k) {
    // Every center in ring k is at least (k - 0.5) * res away from p.
    const double ring_min = (k - 0.5) * res;
    if (ring_min > 0.0 && ring_min * ring_min > radius_sq) break;
    if (found && ring_min > 0.0 && ring_min * ring_min > best_sq) break;
    if (k == 0) {
      visit(c0.ix, c0.iy);
      continue;
    }
    for (int dx = -k; dx <= k; ++dx) {
      visit(c0.ix + dx, c0.iy - k);
      visit(c0.ix + dx, c0.iy + k);
    }
    for (int dy = -k + 1; dy <= k - 1; ++dy) {
      visit(c0.ix - k, c0.iy + dy);
      visit(c0.ix + k, c0.iy + dy);
    }
  }
  if (!found) return std::nullopt;
  const Vec2 local = to_frame(best_center, pose);
  return Polar{std::sqrt(best_sq), wrap_angle(std::atan2(local.y(), local.x()))};
}

}  // namespace ttrk
