#include <doctest.h>

#include <cmath>
#include <vector>

#include "tiba/error.hpp"
#include "tiba/nav.hpp"

using namespace tiba;

namespace {

// Row returns seen from a robot at lateral offset `y0` and heading `th`.
std::vector<Vec2> row_points(double y0, double th, bool left = true, bool right = true) {
  std::vector<Vec2> out;
  const double c = std::cos(th), s = std::sin(th);
  for (double x = 0.2; x < 2.9; x += 0.1) {
    for (double wy : {0.75, -0.75}) {
      if ((wy > 0 && !left) || (wy < 0 && !right)) continue;
      const double dx = x, dy = wy - y0;
      out.push_back({c * dx + s * dy, -s * dx + c * dy});
    }
  }
  return out;
}

TunnelScenario quiet_tunnel(HeightClass h) {
  ScenarioSpec spec;
  spec.length_m = 20.0;
  spec.height_class = h;
  spec.stem_jitter_m = 0.0;
  return generate_tunnel(4, spec);
}

ThermalImage quiet_image(const TunnelScenario& sc, Pose2D pose) {
  ThermalConfig cfg;
  cfg.noise_sigma = 0.0;
  return thermal_render(pose, sc, sc.sun, cfg, 1, 0);
}

}  // namespace

TEST_CASE("steering law examples") {
  const SteerGains g;
  const auto a = corridor_steer({0.1, 0.0, 1.0}, g, 0.8);
  CHECK(a.omega == doctest::Approx(-0.15).epsilon(1e-14));
  CHECK(a.v == doctest::Approx(0.68).epsilon(1e-14));

  const auto b = corridor_steer({0.0, -0.1, 0.5}, g, 0.8);
  CHECK(b.omega == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(b.v == doctest::Approx(0.32).epsilon(1e-14));

  const auto c = corridor_steer({1.0, 0.0, 1.0}, g, 0.8);
  CHECK(c.omega == -1.0);
  CHECK(c.v == 0.0);

  CHECK(corridor_steer({0.0, 0.0, 0.0}, g, 0.8) == Twist{});
}

TEST_CASE("lidar corridor: offset robot between straight rows") {
  const auto pts = row_points(0.2, 0.0);
  const auto est = lidar_corridor_points(pts, {});
  CHECK(est.lateral_offset == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(std::abs(est.heading_error) < 1e-9);
  CHECK(est.confidence == doctest::Approx(1.0));
}

TEST_CASE("lidar corridor: heading error follows the robot yaw") {
  const auto est = lidar_corridor_points(row_points(0.0, 0.1), {});
  CHECK(est.heading_error == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(std::abs(est.lateral_offset) < 1e-9);
}

TEST_CASE("lidar corridor: one row falls back to the nominal spacing") {
  const auto est = lidar_corridor_points(row_points(0.2, 0.0, true, false), {});
  CHECK(est.lateral_offset == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(est.confidence == doctest::Approx(0.5));
}

TEST_CASE("lidar corridor: a stray return does not bend the fit") {
  auto pts = row_points(-0.1, 0.0);
  pts.push_back({1.0, 0.2});
  const auto est = lidar_corridor_points(pts, {});
  CHECK(est.lateral_offset == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(est.confidence < 1.0);
}

TEST_CASE("lidar corridor: nothing nearby raises NoCorridor") {
  CHECK_THROWS_AS(lidar_corridor_points(std::vector<Vec2>{}, {}), NoCorridor);
  const std::vector<Vec2> behind{{-1.0, 0.7}, {-1.1, 0.7}, {-1.2, 0.7}, {-1.3, 0.7}};
  CHECK_THROWS_AS(lidar_corridor_points(behind, {}), NoCorridor);
}

TEST_CASE("lidar corridor: end to end from a simulated scan") {
  const auto sc = quiet_tunnel(HeightClass::kH1);
  LidarConfig lc;
  lc.range_sigma = 0.0;
  const auto scan = lidar_scan({8.0, -0.15, 0.05}, sc, lc, 1, 0);
  const auto est = lidar_corridor(scan, {});
  CHECK(est.lateral_offset == doctest::Approx(-0.15).epsilon(0.03 / 0.15));
  CHECK(est.heading_error == doctest::Approx(0.05).epsilon(0.4));
}

TEST_CASE("thermal band follows the plant height") {
  CHECK(select_band(quiet_image(quiet_tunnel(HeightClass::kH1), {5.0, 0.0, 0.0})) == Band::kWarm);
  CHECK(select_band(quiet_image(quiet_tunnel(HeightClass::kH2), {5.0, 0.0, 0.0})) == Band::kWarm);
  CHECK(select_band(quiet_image(quiet_tunnel(HeightClass::kH3), {5.0, 0.0, 0.0})) == Band::kCold);
}

TEST_CASE("thermal centerline: offset and heading on short plants") {
  const auto sc = quiet_tunnel(HeightClass::kH1);
  const ThermalCenterlineConfig cfg;
  const auto centered = thermal_centerline(quiet_image(sc, {5.0, 0.0, 0.0}), cfg);
  CHECK(std::abs(centered.lateral_offset) < 1e-9);
  CHECK(std::abs(centered.heading_error) < 1e-9);
  CHECK(centered.confidence > 0.5);

  const auto left = thermal_centerline(quiet_image(sc, {5.0, 0.2, 0.0}), cfg);
  CHECK(left.lateral_offset == doctest::Approx(0.2).epsilon(0.25));

  const auto yawed = thermal_centerline(quiet_image(sc, {5.0, 0.0, 0.1}), cfg);
  CHECK(yawed.heading_error == doctest::Approx(0.1).epsilon(0.3));
}

TEST_CASE("thermal centerline: tall plants use the cold band") {
  const auto sc = quiet_tunnel(HeightClass::kH3);
  const auto est = thermal_centerline(quiet_image(sc, {5.0, -0.15, 0.0}), {});
  CHECK(est.lateral_offset == doctest::Approx(-0.15).epsilon(0.3));
}

TEST_CASE("thermal centerline: a featureless image has no path") {
  ThermalImage img;
  img.width = 160;
  img.height = 120;
  img.temps.assign(160 * 120, 45.0);
  CHECK_THROWS_AS(thermal_centerline(img, {}), NoPath);
  img.temps.assign(160 * 120, 10.0);
  CHECK_THROWS_AS(thermal_centerline(img, {}), NoPath);
  img.temps.resize(10);
  CHECK_THROWS_AS(thermal_centerline(img, {}), InvalidParams);
}

TEST_CASE("sun heading inverts the body projection") {
  SunState sun;
  sun.elevation = deg2rad(55.0);
  for (double az : {0.0, 1.0, -2.5}) {
    sun.azimuth = az;
    for (double yaw = -3.0; yaw <= 3.0; yaw += 0.25) {
      const double got = sun_heading(sun_angles_in_body(sun, yaw), sun);
      CHECK(std::abs(normalize_angle(got - yaw)) < 1e-12);
    }
  }
}

TEST_CASE("sun heading refuses a sun near zenith") {
  SunState sun;
  sun.elevation = deg2rad(86.0);
  CHECK_THROWS_AS(sun_heading(sun_angles_in_body(sun, 0.0), sun), IllConditioned);
}

TEST_CASE("pure pursuit turns back toward the path and stops on arrival") {
  const std::vector<Vec2> path = densify_path(std::vector<Vec2>{{0.0, 0.0}, {10.0, 0.0}}, 0.1);
  const WaypointConfig cfg;
  std::size_t progress = 0;
  const auto left_of = waypoint_steer({1.0, 0.5, 0.0}, path, cfg, &progress);
  REQUIRE(left_of.has_value());
  CHECK(left_of->omega < 0.0);
  CHECK(left_of->v == cfg.v_ref);
  CHECK(progress == 10);

  const auto right_of = waypoint_steer({1.0, -0.5, 0.0}, path, cfg);
  REQUIRE(right_of.has_value());
  CHECK(right_of->omega == doctest::Approx(-left_of->omega).epsilon(1e-12));

  CHECK_FALSE(waypoint_steer({9.9, 0.0, 0.0}, path, cfg).has_value());
  CHECK_THROWS_AS(waypoint_steer({}, std::vector<Vec2>{}, cfg), InvalidParams);
}

TEST_CASE("pure pursuit on a straight line: curvature is 2y/L^2") {
  const std::vector<Vec2> path = densify_path(std::vector<Vec2>{{0.0, 0.0}, {10.0, 0.0}}, 0.1);
  WaypointConfig cfg;
  cfg.omega_max = 10.0;
  const auto t = waypoint_steer({0.0, 0.0, 0.0}, path, cfg);
  REQUIRE(t.has_value());
  CHECK(std::abs(t->omega) < 1e-12);
  // Target 2 m ahead on the line, robot 0.3 m to its right and facing along it.
  const auto u = waypoint_steer({3.0, -0.3, 0.0}, path, cfg);
  REQUIRE(u.has_value());
  const double y_body = 0.3;
  CHECK(u->omega == doctest::Approx(cfg.v_ref * 2.0 * y_body / 4.0).epsilon(1e-12));
}

TEST_CASE("densified paths keep the endpoints") {
  const std::vector<Vec2> corners{{0.0, 0.0}, {1.0, 0.0}, {1.0, 0.55}};
  const auto p = densify_path(corners, 0.1);
  CHECK(p.size() == 1 + 10 + 6);
  CHECK(p.front() == Vec2{0.0, 0.0});
  CHECK(p[10] == Vec2{1.0, 0.0});
  CHECK(p.back() == Vec2{1.0, 0.55});
  CHECK(densify_path(std::vector<Vec2>{}, 0.1).empty());
}
