#include "ttrk/worldmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ttrk/rng.hpp"

namespace ttrk {

namespace {

Polygon rect(double w, double h) {
  return {{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}};
}

Polygon regular(int n, double radius) {
  Polygon p;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n;
    p.emplace_back(radius * std::cos(a), radius * std::sin(a));
  }
  return p;
}

ObstacleSet make_train_set() {
  ObstacleSet s{"train", {}};
  s.polygons.push_back(rect(12.0, 4.0));
  s.polygons.push_back(rect(7.0, 7.0));
  // L
  s.polygons.push_back({{-5, -5}, {5, -5}, {5, -2}, {-2, -2}, {-2, 5}, {-5, 5}});
  // U
  s.polygons.push_back({{-6, -5}, {6, -5}, {6, 5}, {3, 5}, {3, -2}, {-3, -2}, {-3, 5}, {-6, 5}});
  // T
  s.polygons.push_back(
      {{-6, 5}, {-6, 2}, {-1.5, 2}, {-1.5, -6}, {1.5, -6}, {1.5, 2}, {6, 2}, {6, 5}});
  // plus
  s.polygons.push_back({{-1.5, -6},
                        {1.5, -6},
                        {1.5, -1.5},
                        {6, -1.5},
                        {6, 1.5},
                        {1.5, 1.5},
                        {1.5, 6},
                        {-1.5, 6},
                        {-1.5, 1.5},
                        {-6, 1.5},
                        {-6, -1.5},
                        {-1.5, -1.5}});
  return s;
}

ObstacleSet make_unseen_set() {
  ObstacleSet s{"unseen", {}};
  s.polygons.push_back({{-6, -5}, {6, -5}, {0, 6}});
  // C
  s.polygons.push_back({{-6, -6}, {6, -6}, {6, -3}, {-3, -3}, {-3, 3}, {6, 3}, {6, 6}, {-6, 6}});
  // H
  s.polygons.push_back({{-6, -6},
                        {-3, -6},
                        {-3, -1.5},
                        {3, -1.5},
                        {3, -6},
                        {6, -6},
                        {6, 6},
                        {3, 6},
                        {3, 1.5},
                        {-3, 1.5},
                        {-3, 6},
                        {-6, 6}});
  s.polygons.push_back(regular(6, 5.0));
  // chevron
  s.polygons.push_back({{-6, -5}, {0, 1}, {6, -5}, {6, 0}, {0, 6}, {-6, 0}});
  return s;
}

}  // namespace

const ObstacleSet& train_obstacles() {
  static const ObstacleSet set = make_train_set();
  return set;
}

const ObstacleSet& unseen_obstacles() {
  static const ObstacleSet set = make_unseen_set();
  return set;
}

const ObstacleSet& obstacle_set_by_tag(const std::string& tag) {
  if (tag == "train") return train_obstacles();
  if (tag == "unseen") return unseen_obstacles();
  throw std::invalid_argument("unknown obstacle set '" + tag + "'");
}

nlohmann::json obstacle_set_to_json(const ObstacleSet& set) {
  nlohmann::json polys = nlohmann::json::array();
  for (const auto& poly : set.polygons) {
    nlohmann::json verts = nlohmann::json::array();
    for (const auto& v : poly) verts.push_back({v.x(), v.y()});
    polys.push_back(verts);
  }
  return {{"schema", "ttrk.obstacles/1"}, {"tag", set.tag}, {"polygons", polys}};
}

ObstacleSet obstacle_set_from_json(const nlohmann::json& j) {
  ObstacleSet set;
  set.tag = j.at("tag").get<std::string>();
  for (const auto& verts : j.at("polygons")) {
    Polygon poly;
    for (const auto& v : verts) poly.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    if (poly.size() < 3) throw std::invalid_argument("obstacle polygon needs >= 3 vertices");
    set.polygons.push_back(std::move(poly));
  }
  return set;
}

double polygon_radius(const Polygon& poly) {
  double r = 0.0;
  for (const auto& v : poly) r = std::max(r, v.norm());
  return r;
}

bool point_in_polygon(const Polygon& poly, const Vec2& p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

void rasterize_polygon(GridMap& map, const Polygon& poly, const Vec2& center, double angle) {
  const Pose2 frame{center.x(), center.y(), angle};
  Polygon placed;
  placed.reserve(poly.size());
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const auto& v : poly) {
    placed.push_back(from_frame(v, frame));
    lo = lo.cwiseMin(placed.back());
    hi = hi.cwiseMax(placed.back());
  }
  const Cell c_lo = map.cell_unchecked(lo);
  const Cell c_hi = map.cell_unchecked(hi);
  for (int iy = std::max(0, c_lo.iy); iy <= std::min(map.height() - 1, c_hi.iy); ++iy) {
    for (int ix = std::max(0, c_lo.ix); ix <= std::min(map.width() - 1, c_hi.ix); ++ix) {
      if (point_in_polygon(placed, map.cell_center(ix, iy))) map.set_occupied(ix, iy, true);
    }
  }
}

GridMap generate_map(std::uint64_t seed, const ObstacleSet& set, const MapGenOptions& options) {
  GridMap map(options.width, options.height, options.resolution, Vec2::Zero());
  if (options.n_obstacles <= 0) return map;
  if (options.n_obstacles > 4) throw std::invalid_argument("generate_map: at most 4 obstacles");
  if (set.polygons.empty()) throw std::invalid_argument("generate_map: empty obstacle set");

  const double qx = map.extent_x() / 2.0;
  const double qy = map.extent_y() / 2.0;
  const double limit = std::min(qx, qy) / 2.0;
  for (const auto& poly : set.polygons) {
    if (polygon_radius(poly) > limit) {
      throw std::invalid_argument("generate_map: obstacle larger than a quadrant");
    }
  }

  Rng rng(seed);
  const std::array<Vec2, 4> centers{Vec2{qx / 2, qy / 2}, Vec2{1.5 * qx, qy / 2},
                                    Vec2{qx / 2, 1.5 * qy}, Vec2{1.5 * qx, 1.5 * qy}};
  for (int k = 0; k < options.n_obstacles; ++k) {
    const int idx = rng.uniform_int(static_cast<int>(set.polygons.size()));
    const double angle = rng.uniform(-kPi, kPi);
    rasterize_polygon(map, set.polygons[idx], map.origin() + centers[k], angle);
  }
  return map;
}

nlohmann::json map_to_json(const GridMap& map, const std::string& obstacle_set, std::uint64_t seed) {
  // Alternating run lengths, starting with a (possibly empty) run of free cells.
  std::vector<std::int64_t> runs;
  std::uint8_t current = 0;
  std::int64_t length = 0;
  for (const auto c : map.cells()) {
    if (c == current) {
      ++length;
    } else {
      runs.push_back(length);
      current = c;
      length = 1;
    }
  }
  runs.push_back(length);
  return {{"schema", "ttrk.map/1"},
          {"resolution", map.resolution()},
          {"width", map.width()},
          {"height", map.height()},
          {"origin", {map.origin().x(), map.origin().y()}},
          {"occupied_rle", runs},
          {"obstacle_set", obstacle_set},
          {"seed", seed}};
}

GridMap map_from_json(const nlohmann::json& j) {
  GridMap map(j.at("width").get<int>(), j.at("height").get<int>(),
              j.at("resolution").get<double>(),
              Vec2{j.at("origin").at(0).get<double>(), j.at("origin").at(1).get<double>()});
  std::int64_t pos = 0;
  bool occ = false;
  const auto total = static_cast<std::int64_t>(map.size());
  for (const auto& run : j.at("occupied_rle")) {
    const auto n = run.get<std::int64_t>();
    if (n < 0 || pos + n > total) throw std::invalid_argument("map_from_json: bad run lengths");
    if (occ) {
      for (std::int64_t k = pos; k < pos + n; ++k) {
        const Cell c = map.cell_at_index(static_cast<int>(k));
        map.set_occupied(c.ix, c.iy, true);
      }
    }
    pos += n;
    occ = !occ;
  }
  if (pos != total) throw std::invalid_argument("map_from_json: run lengths do not cover grid");
  return map;
}

VisitGrid::VisitGrid(const GridMap& geometry)
    : width_(geometry.width()), height_(geometry.height()), lambda_(geometry.size(), 0.0) {}

void VisitGrid::set(int ix, int iy, double value) {
  lambda_[static_cast<std::size_t>(iy) * width_ + ix] = std::clamp(value, 0.0, 1.0);
}

void VisitGrid::apply(std::span<const int> scanned, double decay) {
  for (auto& l : lambda_) l = std::clamp(l * decay, 0.0, 1.0);
  for (const int idx : scanned) lambda_[idx] = 1.0;
}

double visit_decay_factor(double v_bar, double tau, double r_sensor, double c_f) {
  return c_f * std::exp(-v_bar * tau / r_sensor);
}

VisitGrid update_visit_frequency(const VisitGrid& vg, std::span<const int> scanned, double v_bar,
                                 double tau, double r_sensor, double c_f) {
  VisitGrid out = vg;
  out.apply(scanned, visit_decay_factor(v_bar, tau, r_sensor, c_f));
  return out;
}

const std::array<Vec2, EgoStack::kChannels>& ego_window_centers() {
  static const std::array<Vec2, EgoStack::kChannels> centers{
      Vec2{0.0, 0.0}, Vec2{EgoStack::kWindowOffset, 0.0}, Vec2{0.0, EgoStack::kWindowOffset},
      Vec2{-EgoStack::kWindowOffset, 0.0}, Vec2{0.0, -EgoStack::kWindowOffset}};
  return centers;
}

EgoStack extract_egocentric(const GridMap& map, const VisitGrid& vg, const Pose2& pose) {
  EgoStack stack;
  const int half = EgoStack::kSize / 2;
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const auto& centers = ego_window_centers();
  for (int ch = 0; ch < EgoStack::kChannels; ++ch) {
    for (int row = 0; row < EgoStack::kSize; ++row) {
      for (int col = 0; col < EgoStack::kSize; ++col) {
        const double lx = centers[ch].x() + (col - half) * EgoStack::kCellSize;
        const double ly = centers[ch].y() + (row - half) * EgoStack::kCellSize;
        const Vec2 g{pose.x1 + c * lx - s * ly, pose.x2 + s * lx + c * ly};
        const Cell cell = map.cell_unchecked(g);
        float v = -1.0f;
        if (!map.occupied(cell)) v = static_cast<float>(vg.at(cell.ix, cell.iy));
        stack.at(ch, row, col) = v;
      }
    }
  }
  return stack;
}

}  // namespace ttrk
