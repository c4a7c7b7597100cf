#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tiba/sensors.hpp"
#include "tiba/types.hpp"
#include "tiba/world.hpp"

namespace tiba {

/// Robot pose relative to the corridor centerline.
struct CorridorEstimate {
  double lateral_offset = 0.0;  // m, positive when the robot is left of center
  double heading_error = 0.0;   // rad, robot heading minus corridor heading
  double confidence = 0.0;      // [0, 1]

  friend bool operator==(const CorridorEstimate&, const CorridorEstimate&) = default;
};

enum class Band { kWarm, kCold };

struct ThermalCenterlineConfig {
  ThermalCamera camera;
  double warm_min = 37.5;
  double warm_max = 80.0;
  double cold_min = -20.0;
  double cold_max = 28.0;
  double min_ground_range = 0.5;  // m, rows nearer than this are ignored
  double max_ground_range = 6.0;  // m, rows farther than this are ignored
  int min_rows = 10;
  double width_tolerance = 0.5;   // reject rows whose metric width is off the median by more
};

/// Band chosen for the image: warm unless the bottom-center region is colder
/// than the bottom side regions.
Band select_band(const ThermalImage& img);

/// Mask of pixels inside the band, row-major.
std::vector<bool> band_mask(const ThermalImage& img, Band band, const ThermalCenterlineConfig& cfg);

/// Centerline from the margins of the path mask: per row leftmost and
/// rightmost mask pixels, a least-squares line through each margin, and the
/// mean of the two lines projected onto flat ground. Throws NoPath.
CorridorEstimate thermal_centerline(const ThermalImage& img, const ThermalCenterlineConfig& cfg);

/// Same, from a precomputed mask (width × height, row-major).
CorridorEstimate thermal_centerline_mask(const std::vector<bool>& mask, int width, int height,
                                         const ThermalCenterlineConfig& cfg);

struct LidarCorridorConfig {
  int min_points = 4;
  double min_range = 0.05;
  double max_fit_range = 3.0;  // m
  double nominal_row_spacing = 1.5;
  double outlier_factor = 3.0;  // residual cutoff in median absolute residuals
  double one_sided_penalty = 0.5;
};

/// Fits the two rows of returns ahead of the robot. Throws NoCorridor.
CorridorEstimate lidar_corridor(const LidarScan& scan, const LidarCorridorConfig& cfg);
/// Same, from Cartesian hit points in the body frame.
CorridorEstimate lidar_corridor_points(std::span<const Vec2> hits, const LidarCorridorConfig& cfg);

struct SteerGains {
  double k_y = 1.5;
  double k_theta = 2.0;
  double omega_max = 1.0;  // rad/s
};

/// ω = −k_y·offset − k_θ·heading_error clamped to ±omega_max;
/// v = v_ref·(1 − |ω|/omega_max)·confidence.
Twist corridor_steer(const CorridorEstimate& est, const SteerGains& gains, double v_ref);

/// World yaw from the measured sun projection angles and the known sun
/// azimuth. Throws IllConditioned when the sun is too close to zenith.
double sun_heading(const SolarAngles& angles, const SunState& sun, double elevation_max = deg2rad(85.0));

struct WaypointConfig {
  double lookahead = 2.0;       // m
  double arrival_radius = 0.25; // m
  double v_ref = 0.8;           // m/s
  double omega_max = 1.0;       // rad/s
};

/// Pure pursuit along a polyline. Returns nullopt (done) once within the
/// arrival radius of the final point. `progress` remembers the last target
/// index between calls; pass 0 for a fresh path.
std::optional<Twist> waypoint_steer(const Pose2D& pose, std::span<const Vec2> path, const WaypointConfig& cfg,
                                    std::size_t* progress = nullptr);

/// Points every `spacing` along a polyline, endpoints included.
std::vector<Vec2> densify_path(std::span<const Vec2> path, double spacing);

}  // namespace tiba
