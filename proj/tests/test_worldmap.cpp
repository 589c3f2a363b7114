#include <cmath>
#include <fstream>

#include "doctest.h"
#include "ttrk/geom.hpp"
#include "ttrk/rng.hpp"
#include "ttrk/worldmap.hpp"

using namespace ttrk;

TEST_CASE("no obstacles gives a free grid") {
  MapGenOptions opt;
  opt.n_obstacles = 0;
  const GridMap map = generate_map(9, train_obstacles(), opt);
  CHECK(map.occupied_count() == 0);
  CHECK(map.width() == 181);
  CHECK(map.resolution() == 0.4);
}

TEST_CASE("map generation is deterministic per seed") {
  for (std::uint64_t seed : {0ull, 1ull, 77ull}) {
    const GridMap a = generate_map(seed, train_obstacles());
    const GridMap b = generate_map(seed, train_obstacles());
    CHECK(a == b);
    CHECK(a.occupied_count() > 0);
  }
  CHECK_FALSE(generate_map(1, train_obstacles()) == generate_map(2, train_obstacles()));
}

TEST_CASE("occupied cells stay inside inflated quadrant boxes") {
  for (const ObstacleSet* set : {&train_obstacles(), &unseen_obstacles()}) {
    double radius = 0.0;
    for (const auto& poly : set->polygons) radius = std::max(radius, polygon_radius(poly));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const GridMap map = generate_map(seed, *set);
      const double qx = map.extent_x() / 2;
      const double qy = map.extent_y() / 2;
      for (int iy = 0; iy < map.height(); ++iy) {
        for (int ix = 0; ix < map.width(); ++ix) {
          if (!map.occupied(ix, iy)) continue;
          const Vec2 p = map.cell_center(ix, iy) - map.origin();
          bool inside = false;
          for (int k = 0; k < 4; ++k) {
            const double x0 = (k % 2) * qx;
            const double y0 = (k / 2) * qy;
            // Quadrant box inflated by the largest polygon radius.
            inside = inside || (p.x() >= x0 + qx / 2 - radius && p.x() <= x0 + qx / 2 + radius &&
                                p.y() >= y0 + qy / 2 - radius && p.y() <= y0 + qy / 2 + radius);
          }
          REQUIRE(inside);
        }
      }
    }
  }
}

TEST_CASE("fewer obstacles fill quadrants in order") {
  MapGenOptions opt;
  opt.n_obstacles = 1;
  const GridMap map = generate_map(4, train_obstacles(), opt);
  CHECK(map.occupied_count() > 0);
  for (int iy = 0; iy < map.height(); ++iy) {
    for (int ix = 0; ix < map.width(); ++ix) {
      if (map.occupied(ix, iy)) {
        CHECK(map.cell_center(ix, iy).x() < map.extent_x() / 2);
        CHECK(map.cell_center(ix, iy).y() < map.extent_y() / 2);
      }
    }
  }
}

TEST_CASE("obstacle sets round trip through JSON and match the data files") {
  for (const std::string tag : {"train", "unseen"}) {
    const ObstacleSet& set = obstacle_set_by_tag(tag);
    const ObstacleSet back = obstacle_set_from_json(obstacle_set_to_json(set));
    CHECK(back.tag == set.tag);
    REQUIRE(back.polygons.size() == set.polygons.size());

    std::ifstream in(std::string(TTRK_DATA_DIR) + "/obstacles_" + tag + ".json");
    REQUIRE(in.good());
    const ObstacleSet file = obstacle_set_from_json(nlohmann::json::parse(in));
    CHECK(file.tag == tag);
    REQUIRE(file.polygons.size() == set.polygons.size());
    for (std::size_t i = 0; i < set.polygons.size(); ++i) {
      REQUIRE(file.polygons[i].size() == set.polygons[i].size());
      for (std::size_t v = 0; v < set.polygons[i].size(); ++v) {
        CHECK((file.polygons[i][v] - set.polygons[i][v]).norm() < 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(obstacle_set_by_tag("nope"), std::invalid_argument);
}

TEST_CASE("train and unseen sets share no polygon") {
  for (const auto& a : train_obstacles().polygons) {
    for (const auto& b : unseen_obstacles().polygons) {
      bool same = a.size() == b.size();
      for (std::size_t i = 0; same && i < a.size(); ++i) same = (a[i] - b[i]).norm() < 1e-9;
      CHECK_FALSE(same);
    }
  }
}

TEST_CASE("map JSON round trip") {
  const GridMap map = generate_map(3, unseen_obstacles());
  CHECK(map_from_json(map_to_json(map, "unseen", 3)) == map);
}

TEST_CASE("point in polygon on a square") {
  const Polygon sq{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  CHECK(point_in_polygon(sq, {0, 0}));
  CHECK(point_in_polygon(sq, {0.9, -0.9}));
  CHECK_FALSE(point_in_polygon(sq, {1.1, 0}));
  CHECK(polygon_radius(sq) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("visit frequency update examples") {
  GridMap geometry(10, 10, 0.4, Vec2::Zero());
  VisitGrid vg(geometry);
  for (int i = 0; i < 100; ++i) vg.set(i % 10, i / 10, 1.0);

  const std::vector<int> scanned{0, 5, 17};
  const VisitGrid a = update_visit_frequency(vg, scanned, 2.0, 0.5, 10.0, 0.95);
  // 0.95 * exp(-0.1) by its series, kept apart from the library's exp.
  long double e = 0.0L, term = 1.0L;
  for (int k = 1; k < 30; ++k) {
    e += term;
    term *= -0.1L / k;
  }
  const double expected = static_cast<double>(0.95L * e);
  CHECK(a.at(1, 0) == doctest::Approx(expected).epsilon(1e-14));
  // 0.859595...: 0.8596 rounded, 0.8595 truncated.
  CHECK(std::round(a.at(1, 0) * 1e4) / 1e4 == doctest::Approx(0.8596));
  CHECK(std::floor(a.at(1, 0) * 1e4) / 1e4 == doctest::Approx(0.8595));
  CHECK(a.at(0, 0) == 1.0);
  CHECK(a.at(5, 0) == 1.0);
  CHECK(a.at(7, 1) == 1.0);

  VisitGrid half(geometry);
  for (int i = 0; i < 100; ++i) half.set(i % 10, i / 10, 0.01 * i);
  const VisitGrid same = update_visit_frequency(half, {}, 0.0, 0.5, 10.0, 1.0);
  CHECK(same == half);
}

TEST_CASE("visit frequency stays in range and decays") {
  GridMap geometry(20, 20, 0.4, Vec2::Zero());
  VisitGrid vg(geometry);
  Rng rng(8);
  for (int step = 0; step < 200; ++step) {
    std::vector<int> scanned;
    for (int i = 0; i < 400; ++i) {
      if (rng.uniform(0, 1) < 0.1) scanned.push_back(i);
    }
    const VisitGrid next =
        update_visit_frequency(vg, scanned, rng.uniform(0, 4), 0.5, 10.0, rng.uniform(0.5, 1.0));
    std::size_t s = 0;
    for (int i = 0; i < 400; ++i) {
      const bool hit = s < scanned.size() && scanned[s] == i;
      if (hit) {
        ++s;
        CHECK(next.at_index(i) == 1.0);
      } else {
        CHECK(next.at_index(i) <= vg.at_index(i));
      }
      CHECK(next.at_index(i) >= 0.0);
      CHECK(next.at_index(i) <= 1.0);
    }
    vg = next;
  }
}

TEST_CASE("egocentric stack on an empty map is zero") {
  GridMap map;
  VisitGrid vg(map);
  const EgoStack s = extract_egocentric(map, vg, Pose2{36.2, 36.2, 1.1});
  for (float v : s.values) CHECK(v == 0.0f);
}

TEST_CASE("obstacle ahead shows up in the forward window") {
  GridMap map;
  VisitGrid vg(map);
  const Vec2 c = map.cell_center(90, 90);
  map.set_occupied(115, 90, true);  // 25 cells = 10 m ahead
  const EgoStack s = extract_egocentric(map, vg, Pose2{c.x(), c.y(), 0.0});
  CHECK(s.at(1, 12, 12) == -1.0f);
  int forward = 0;
  for (int ch = 0; ch < EgoStack::kChannels; ++ch) {
    for (int r = 0; r < EgoStack::kSize; ++r) {
      for (int col = 0; col < EgoStack::kSize; ++col) {
        if (s.at(ch, r, col) == -1.0f) {
          CHECK(ch == 1);
          ++forward;
        }
      }
    }
  }
  CHECK(forward == 1);
}

TEST_CASE("out of map samples read as obstacles") {
  GridMap map(30, 30, 0.4, Vec2::Zero());
  VisitGrid vg(map);
  const EgoStack s = extract_egocentric(map, vg, Pose2{6.0, 6.0, 0.0});
  CHECK(s.at(0, 12, 12) == 0.0f);
  CHECK(s.at(1, 12, 24) == -1.0f);
}

TEST_CASE("egocentric stack is equivariant under a joint quarter turn") {
  constexpr int n = 61;
  constexpr int c = 30;
  Rng rng(21);
  GridMap map(n, n, 0.4, Vec2::Zero());
  GridMap turned(n, n, 0.4, Vec2::Zero());
  VisitGrid vg(map);
  VisitGrid vg_turned(turned);
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      // (dx, dy) about the center cell maps to (-dy, dx).
      const int tx = c - (iy - c);
      const int ty = ix;
      if (rng.uniform(0, 1) < 0.05 && !(ix == c && iy == c)) {
        map.set_occupied(ix, iy, true);
        turned.set_occupied(tx, ty, true);
      }
      const double lam = rng.uniform(0, 1);
      vg.set(ix, iy, lam);
      vg_turned.set(tx, ty, lam);
    }
  }
  const Vec2 p = map.cell_center(c, c);
  for (double theta : {0.0, 0.3, -2.0}) {
    const EgoStack a = extract_egocentric(map, vg, Pose2{p.x(), p.y(), theta});
    const EgoStack b =
        extract_egocentric(turned, vg_turned, Pose2{p.x(), p.y(), wrap_angle(theta + kPi / 2)});
    CHECK(a == b);
  }
}
