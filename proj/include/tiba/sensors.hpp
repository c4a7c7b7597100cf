#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tiba/random.hpp"
#include "tiba/types.hpp"
#include "tiba/world.hpp"

namespace tiba {

// ---------------------------------------------------------------------------
// Quadrant sun sensor
//
// Cell layout (sensor x forward, y left): V1 (+x,-y), V2 (+x,+y), V3 (-x,+y),
// V4 (-x,-y). The normalized differences are
//   F_x = (V1 + V2 - V3 - V4) / ΣV,   F_y = (V2 + V3 - V1 - V4) / ΣV
// and the projection angles are alpha = atan(C·F).

struct SolarReading {
  double v1 = 0.0, v2 = 0.0, v3 = 0.0, v4 = 0.0;  // volts
  bool valid = false;

  double sum() const { return v1 + v2 + v3 + v4; }
  friend bool operator==(const SolarReading&, const SolarReading&) = default;
};

struct SolarAngles {
  double alpha_x = 0.0;  // rad
  double alpha_y = 0.0;  // rad

  friend bool operator==(const SolarAngles&, const SolarAngles&) = default;
};

struct SolarSensorConfig {
  double c = 1.0;                       // sensor constant
  double fov = deg2rad(60.0);           // half-angle per axis
  double nominal_sum = 2.0;             // volts under full sun
  double threshold_fraction = 0.05;
  double noise_sigma = 0.0005;          // volts per cell

  double threshold() const { return threshold_fraction * nominal_sum; }
};

/// Cell voltages that reproduce `angles` under the symmetric quarter split,
/// scaled by the sun's cloud factor.
SolarReading solar_synthesize(const SolarAngles& angles, const SunState& sun, const SolarSensorConfig& cfg);
SolarReading solar_synthesize(const SolarAngles& angles, const SunState& sun, double c, double total_volts);

/// Throws InsufficientLight when ΣV is at or below the threshold.
SolarAngles solar_estimate(const SolarReading& r, const SolarSensorConfig& cfg);
SolarAngles solar_estimate(const SolarReading& r, double c, double threshold = 0.0);

/// Projection angles of the sun ray on a level sensor whose x axis points at
/// world yaw `yaw`.
SolarAngles sun_angles_in_body(const SunState& sun, double yaw);

/// Synthesized reading for the robot heading plus seeded per-cell noise.
SolarReading solar_sample(const SunState& sun, double yaw, const SolarSensorConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// 2D lidar

struct LidarConfig {
  double angle_min = -std::numbers::pi;
  double angle_max = std::numbers::pi - 2.0 * std::numbers::pi / 360.0;
  int n_beams = 360;
  double max_range = 8.0;
  double range_sigma = 0.01;
  double canopy_hit_prob = 0.3;
};

struct LidarScan {
  double angle_min = 0.0;
  double angle_max = 0.0;
  int n_beams = 0;
  double max_range = 0.0;
  std::vector<double> ranges;

  double angle_increment() const { return n_beams > 1 ? (angle_max - angle_min) / (n_beams - 1) : 0.0; }
  double beam_angle(int i) const { return angle_min + i * angle_increment(); }
  friend bool operator==(const LidarScan&, const LidarScan&) = default;
};

/// Casts every beam against stem circles (and H3 canopy rectangles, which
/// return with probability canopy_hit_prob). Noise comes from the substream
/// (seed, frame) and is truncated at ±5σ.
LidarScan lidar_scan(const Pose2D& pose, const TunnelScenario& scene, const LidarConfig& cfg, std::uint64_t seed,
                     std::uint64_t frame);

// ---------------------------------------------------------------------------
// Thermal camera

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

/// Pinhole camera on the robot, looking forward and pitched down.
struct ThermalCamera {
  int width = 160;
  int height = 120;
  double hfov = deg2rad(50.0);
  double mount_height = 1.0;     // m above ground
  double pitch = deg2rad(-10.0);  // negative looks down
  double forward_offset = 0.3;   // m ahead of the body origin

  double focal_px() const;
  double cx() const { return (width - 1) / 2.0; }
  double cy() const { return (height - 1) / 2.0; }
  /// Unnormalized ray through image point (u, v) in the body frame
  /// (x forward, y left, z up).
  Vec3 ray_body(double u, double v) const;
  /// Flat-ground intersection of the ray through (u, v), body frame.
  std::optional<Vec2> ground_point(double u, double v) const;
};

struct ThermalConfig {
  ThermalCamera camera;
  double t_ground = 45.0;
  double t_plant = 30.0;
  double t_kerb = 25.0;
  double t_ground_inverted = 26.0;
  double t_plant_inverted = 30.0;
  double t_ambient = 25.0;
  double t_sky_offset = -10.0;
  double kerb_width = 0.15;  // m, strip at the base of each row
  double noise_sigma = 0.3;
};

struct ThermalImage {
  int width = 0;
  int height = 0;
  std::vector<double> temps;  // row-major, °C

  double at(int u, int v) const { return temps[static_cast<std::size_t>(v) * width + u]; }
  double& at(int u, int v) { return temps[static_cast<std::size_t>(v) * width + u]; }
  friend bool operator==(const ThermalImage&, const ThermalImage&) = default;
};

/// Renders the tunnel's temperature field. Short plants (H1/H2): warm ground
/// path, cold kerb at the row bases. Tall plants (H3): ground colder than
/// plants and no kerb. Contrast toward ambient scales with cloud_factor.
ThermalImage thermal_render(const Pose2D& pose, const TunnelScenario& scene, const SunState& sun,
                            const ThermalConfig& cfg, std::uint64_t seed, std::uint64_t frame);

// ---------------------------------------------------------------------------
// Hall-only odometry

struct OdometryEstimate {
  Pose2D pose;
  double v = 0.0;
  double omega = 0.0;

  friend bool operator==(const OdometryEstimate&, const OdometryEstimate&) = default;
};

OdometryEstimate odometry_update(const OdometryEstimate& est, std::int64_t ticks_left, std::int64_t ticks_right,
                                 const RobotParams& p, double dt);

// ---------------------------------------------------------------------------
// Temperature / humidity

struct HTReading {
  double temperature = 0.0;  // °C
  double humidity = 0.0;     // %RH

  friend bool operator==(const HTReading&, const HTReading&) = default;
};

struct Ambient {
  double temperature = 30.0;
  double humidity = 70.0;
};

HTReading ht_sample(const Ambient& env, double sigma_t, double sigma_h, Rng& rng);

}  // namespace tiba
