#include "ttrk/grid_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ttrk {

GridMap::GridMap(int width, int height, double resolution, const Vec2& origin)
    : width_(width), height_(height), resolution_(resolution), origin_(origin) {
  if (width <= 0 || height <= 0 || !(resolution > 0.0)) {
    throw std::invalid_argument("GridMap: non-positive geometry");
  }
  cells_.assign(static_cast<std::size_t>(width) * height, 0);
}

bool GridMap::contains(const Vec2& p) const {
  return p.x() >= origin_.x() && p.y() >= origin_.y() && p.x() < origin_.x() + extent_x() &&
         p.y() < origin_.y() + extent_y();
}

Cell GridMap::cell_unchecked(const Vec2& p) const {
  return {static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_)),
          static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_))};
}

std::optional<Cell> GridMap::cell_of(const Vec2& p) const {
  if (!std::isfinite(p.x()) || !std::isfinite(p.y())) return std::nullopt;
  const Cell c = cell_unchecked(p);
  if (!in_bounds(c.ix, c.iy)) return std::nullopt;
  return c;
}

Vec2 GridMap::cell_center(int ix, int iy) const {
  return {origin_.x() + (ix + 0.5) * resolution_, origin_.y() + (iy + 0.5) * resolution_};
}

void GridMap::set_occupied(int ix, int iy, bool value) {
  if (!in_bounds(ix, iy)) throw std::out_of_range("GridMap::set_occupied");
  cells_[index(ix, iy)] = value ? 1 : 0;
}

bool GridMap::is_clear(const Vec2& p, double margin) const {
  const auto c = cell_of(p);
  if (!c || occupied(*c)) return false;
  if (p.x() - origin_.x() < margin || p.y() - origin_.y() < margin ||
      origin_.x() + extent_x() - p.x() < margin || origin_.y() + extent_y() - p.y() < margin) {
    return false;
  }
  const int reach = static_cast<int>(std::ceil(margin / resolution_)) + 1;
  const double margin_sq = margin * margin;
  for (int iy = std::max(0, c->iy - reach); iy <= std::min(height_ - 1, c->iy + reach); ++iy) {
    for (int ix = std::max(0, c->ix - reach); ix <= std::min(width_ - 1, c->ix + reach); ++ix) {
      if (cells_[index(ix, iy)] == 0) continue;
      if ((cell_center(ix, iy) - p).squaredNorm() < margin_sq) return false;
    }
  }
  return true;
}

std::size_t GridMap::occupied_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

}  // namespace ttrk
