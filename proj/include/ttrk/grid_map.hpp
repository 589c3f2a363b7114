#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ttrk {

using Vec2 = Eigen::Vector2d;

struct Cell {
  int ix = 0;
  int iy = 0;
  bool operator==(const Cell&) const = default;
};

/// Binary occupancy grid. Cell (0,0) spans [origin, origin + resolution) on
/// both axes; storage is row-major with x fastest. Anything outside the grid
/// counts as occupied.
class GridMap {
 public:
  static constexpr double kDefaultResolution = 0.4;
  static constexpr int kDefaultSize = 181;

  GridMap() : GridMap(kDefaultSize, kDefaultSize, kDefaultResolution, Vec2::Zero()) {}
  GridMap(int width, int height, double resolution, const Vec2& origin);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Vec2& origin() const { return origin_; }
  double extent_x() const { return width_ * resolution_; }
  double extent_y() const { return height_ * resolution_; }
  std::size_t size() const { return cells_.size(); }

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < width_ && iy < height_; }
  bool contains(const Vec2& p) const;
  std::optional<Cell> cell_of(const Vec2& p) const;
  /// Cell indices for any point, possibly out of bounds.
  Cell cell_unchecked(const Vec2& p) const;
  Vec2 cell_center(int ix, int iy) const;
  Vec2 cell_center(const Cell& c) const { return cell_center(c.ix, c.iy); }
  int index(int ix, int iy) const { return iy * width_ + ix; }
  Cell cell_at_index(int idx) const { return {idx % width_, idx / width_}; }

  bool occupied(int ix, int iy) const { return !in_bounds(ix, iy) || cells_[index(ix, iy)] != 0; }
  bool occupied(const Cell& c) const { return occupied(c.ix, c.iy); }
  bool occupied_at(const Vec2& p) const { return occupied(cell_unchecked(p)); }
  void set_occupied(int ix, int iy, bool value);

  /// True iff p is inside the map, its own cell is free, it keeps `margin`
  /// from the map boundary, and no occupied cell center lies within `margin`.
  bool is_clear(const Vec2& p, double margin) const;

  std::size_t occupied_count() const;
  std::span<const std::uint8_t> cells() const { return cells_; }

  bool operator==(const GridMap&) const = default;

 private:
  int width_;
  int height_;
  double resolution_;
  Vec2 origin_;
  std::vector<std::uint8_t> cells_;
};

}  // namespace ttrk
