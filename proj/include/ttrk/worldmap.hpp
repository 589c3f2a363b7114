#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ttrk/geom.hpp"
#include "ttrk/grid_map.hpp"

namespace ttrk {

using Polygon = std::vector<Vec2>;

/// Obstacle candidates in local coordinates, centered near the origin.
struct ObstacleSet {
  std::string tag;  // "train" or "unseen"
  std::vector<Polygon> polygons;
};

const ObstacleSet& train_obstacles();
const ObstacleSet& unseen_obstacles();
/// Looks up a built-in set by tag; throws std::invalid_argument otherwise.
const ObstacleSet& obstacle_set_by_tag(const std::string& tag);

nlohmann::json obstacle_set_to_json(const ObstacleSet& set);
ObstacleSet obstacle_set_from_json(const nlohmann::json& j);

/// Largest vertex distance from the polygon's local origin.
double polygon_radius(const Polygon& poly);
/// Even-odd rule point-in-polygon test.
bool point_in_polygon(const Polygon& poly, const Vec2& p);

struct MapGenOptions {
  int n_obstacles = 4;  // one per quadrant, quadrants filled in order
  int width = GridMap::kDefaultSize;
  int height = GridMap::kDefaultSize;
  double resolution = GridMap::kDefaultResolution;
};

/// Places obstacles (sampled with replacement, random orientation) at the
/// quadrant centers and rasterizes them by cell-center containment.
GridMap generate_map(std::uint64_t seed, const ObstacleSet& set, const MapGenOptions& options = {});

/// Rasterizes one polygon rotated by `angle` about its origin and moved to `center`.
void rasterize_polygon(GridMap& map, const Polygon& poly, const Vec2& center, double angle);

nlohmann::json map_to_json(const GridMap& map, const std::string& obstacle_set, std::uint64_t seed);
GridMap map_from_json(const nlohmann::json& j);

/// Per-cell visit frequency over the geometry of a GridMap.
class VisitGrid {
 public:
  explicit VisitGrid(const GridMap& geometry);

  int width() const { return width_; }
  int height() const { return height_; }
  double at(int ix, int iy) const { return lambda_[static_cast<std::size_t>(iy) * width_ + ix]; }
  double at_index(int idx) const { return lambda_[idx]; }
  void set(int ix, int iy, double value);
  std::span<const double> values() const { return lambda_; }

  /// Scanned cells become 1; every other cell is multiplied by `decay` and clamped to [0,1].
  void apply(std::span<const int> scanned, double decay);

  bool operator==(const VisitGrid&) const = default;

 private:
  int width_;
  int height_;
  std::vector<double> lambda_;
};

/// Decay applied to unscanned cells: c_f * exp(-v_bar * tau / r_sensor).
double visit_decay_factor(double v_bar, double tau, double r_sensor, double c_f);

VisitGrid update_visit_frequency(const VisitGrid& vg, std::span<const int> scanned, double v_bar,
                                 double tau, double r_sensor, double c_f);

/// Five 25x25 windows sampled in the agent frame.
struct EgoStack {
  static constexpr int kChannels = 5;
  static constexpr int kSize = 25;
  static constexpr int kCount = kChannels * kSize * kSize;
  static constexpr double kCellSize = 0.4;   // meters between samples
  static constexpr double kWindowOffset = 10.0;

  std::array<float, kCount> values{};

  float& at(int channel, int row, int col) { return values[(channel * kSize + row) * kSize + col]; }
  float at(int channel, int row, int col) const {
    return values[(channel * kSize + row) * kSize + col];
  }
  bool operator==(const EgoStack&) const = default;
};

/// Window centers in the agent frame, channel order.
const std::array<Vec2, EgoStack::kChannels>& ego_window_centers();

/// Channel c, row i, column j samples the agent-frame point
/// center_c + ((j - 12) * 0.4, (i - 12) * 0.4) at its nearest cell. Occupied or
/// out-of-map samples read -1, everything else reads the visit frequency.
EgoStack extract_egocentric(const GridMap& map, const VisitGrid& vg, const Pose2& pose);

}  // namespace ttrk
