#include "ttrk/render.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ttrk/geom.hpp"

namespace ttrk {

namespace {

constexpr double kPx = 10.0;  // pixels per meter

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

const char* kTargetColors[] = {"#d62728", "#2ca02c", "#9467bd", "#8c564b"};

// Occupied cells as one rect per horizontal run; y flipped so +y is up.
void draw_obstacles(std::ostringstream& os, const GridMap& map, double px) {
  const double res = map.resolution();
  for (int iy = 0; iy < map.height(); ++iy) {
    for (int ix = 0; ix < map.width();) {
      if (!map.occupied(ix, iy)) {
        ++ix;
        continue;
      }
      int end = ix;
      while (end < map.width() && map.occupied(end, iy)) ++end;
      os << "<rect x=\"" << num(ix * res * px) << "\" y=\""
         << num((map.height() - iy - 1) * res * px) << "\" width=\"" << num((end - ix) * res * px)
         << "\" height=\"" << num(res * px) << "\" fill=\"#444\"/>\n";
      ix = end;
    }
  }
}

std::string svg_point(const Vec2& p, const GridMap& map, double px) {
  return num((p.x() - map.origin().x()) * px) + "," +
         num((map.extent_y() - (p.y() - map.origin().y())) * px);
}

}  // namespace

std::string trajectory_svg(const EpisodeLog& log, const GridMap& map) {
  std::ostringstream os;
  const double w = map.extent_x() * kPx;
  const double h = map.extent_y() * kPx;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  draw_obstacles(os, map, kPx);

  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\""
     << svg_point(log.header.initial_pose.position(), map, kPx);
  for (const auto& s : log.steps) os << ' ' << svg_point(s.pose.position(), map, kPx);
  os << "\"/>\n";

  for (int i = 0; i < log.n_targets(); ++i) {
    const char* color = kTargetColors[i % 4];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
       << svg_point(log.header.initial_targets.at(i).head<2>(), map, kPx);
    for (const auto& s : log.steps) os << ' ' << svg_point(s.targets[i].true_state.head<2>(), map, kPx);
    os << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1\" stroke-dasharray=\"4,3\" points=\""
       << svg_point(log.header.initial_beliefs.at(i).mean.head<2>(), map, kPx);
    for (const auto& s : log.steps) os << ' ' << svg_point(s.targets[i].posterior.mean.head<2>(), map, kPx);
    os << "\"/>\n";
  }
  const Vec2 start = log.header.initial_pose.position();
  os << "<circle cx=\"" << num((start.x() - map.origin().x()) * kPx) << "\" cy=\""
     << num((map.extent_y() - (start.y() - map.origin().y())) * kPx)
     << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
  os << "</svg>\n";
  return os.str();
}

std::string heat_svg(const std::vector<double>& values, int width, int height,
                     const std::string& title) {
  const double cell = 4.0;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width * cell) << "\" height=\""
     << num(height * cell + 20) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"4\" y=\"14\" font-size=\"12\">" << title << "</text>\n";
  for (int iy = 0; iy < height; ++iy) {
    for (int ix = 0; ix < width; ++ix) {
      const double v = values.at(static_cast<std::size_t>(iy) * width + ix);
      if (v <= 0.0) continue;
      os << "<rect x=\"" << num(ix * cell) << "\" y=\"" << num(20 + (height - iy - 1) * cell)
         << "\" width=\"" << num(cell) << "\" height=\"" << num(cell)
         << "\" fill=\"#08306b\" fill-opacity=\"" << num(std::min(1.0, v)) << "\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

bool ZetaField::directions_ok() const {
  for (const auto& a : arrows) {
    if (a.slow.tail<2>().dot(a.away) < 0.0 || a.fast.tail<2>().dot(a.away) < 0.0) return false;
  }
  return true;
}

bool ZetaField::magnitudes_ok() const {
  for (const auto& a : arrows) {
    if (a.fast.norm() < a.slow.norm()) return false;
  }
  return true;
}

ZetaField compute_zeta_field() {
  ZetaField f{GridMap(75, 75, 0.4, Vec2::Zero()), {}, -3.0 * kPi / 4.0, {}};
  for (int iy = 34; iy < 41; ++iy) {
    for (int ix = 34; ix < 41; ++ix) f.map.set_occupied(ix, iy, true);
  }
  f.params.tau = 0.5;
  f.params.nu_max = 3.0;
  f.params.r_margin = 0.1;
  f.params.r_min = 1.0;
  f.params.search_radius = 6.0;

  const Vec2 dir{std::cos(f.heading), std::sin(f.heading)};
  for (int iy = 22; iy <= 52; iy += 2) {
    for (int ix = 22; ix <= 52; ix += 2) {
      if (f.map.occupied(ix, iy)) continue;
      const Vec2 p = f.map.cell_center(ix, iy);
      const Pose2 pose{p.x(), p.y(), f.heading};
      const auto obstacle = closest_obstacle(f.map, pose, f.params.search_radius);
      if (!obstacle) continue;
      const double a = f.heading + obstacle->angle;
      ZetaArrow arrow;
      arrow.position = p;
      arrow.away = -Vec2{std::cos(a), std::sin(a)};
      TargetState y;
      y.heading = f.heading;
      y.y << p.x(), p.y(), dir.x(), dir.y();
      arrow.slow = zeta(y, f.map, f.params);
      y.y.tail<2>() = 3.0 * dir;
      arrow.fast = zeta(y, f.map, f.params);
      f.arrows.push_back(arrow);
    }
  }
  return f;
}

std::string zeta_field_svg(const ZetaField& field) {
  const double px = 25.0;
  const double w = field.map.extent_x() * px;
  const double h = field.map.extent_y() * px;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  draw_obstacles(os, field.map, px);
  // Arrow length: 0.5 m per (m/s) of velocity increment.
  auto arrow = [&](const Vec2& from, const Vec2& v, const char* color) {
    const Vec2 to = from + 0.5 * v;
    os << "<line x1=\"" << num(from.x() * px) << "\" y1=\"" << num(h - from.y() * px) << "\" x2=\""
       << num(to.x() * px) << "\" y2=\"" << num(h - to.y() * px) << "\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>\n";
  };
  for (const auto& a : field.arrows) {
    os << "<circle cx=\"" << num(a.position.x() * px) << "\" cy=\"" << num(h - a.position.y() * px)
       << "\" r=\"1.5\" fill=\"#999\"/>\n";
    arrow(a.position, a.slow.tail<2>(), "#ff7f0e");
    arrow(a.position, a.fast.tail<2>(), "#1f77b4");
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace ttrk
