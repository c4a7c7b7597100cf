#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tiba/kv_config.hpp"
#include "tiba/types.hpp"

namespace tiba {

inline constexpr double kStandardGravity = 9.8;
/// kgf·cm to N·m.
inline constexpr double kKgfCmToNm = 0.0980665;

/// Physical parameters of the tankette. Defaults are the field prototype:
/// 130 kg, 0.2 m tires, 50:1 gearbox on a 1.57 N·m / 3000 rpm motor.
struct RobotParams {
  double mass = 130.0;               // kg
  double wheel_radius = 0.2;         // m
  double track_width = 0.6;          // m, side-to-side wheel contact spacing
  double wheelbase = 0.7;            // m
  double gear_ratio = 50.0;
  double motor_rated_torque = 1.57;  // N·m
  double motor_free_speed = 3000.0;  // rpm
  double ticks_per_motor_rev = 24.0;
  double body_width = 0.8;           // m
  double body_length = 1.0;          // m
  double slip_widening_factor = 1.2;
  double motor_time_constant = 0.15;  // s

  /// Throws InvalidParams when an invariant is violated.
  void validate() const;

  /// Wheel-shaft speed limit at motor free speed, rad/s.
  double wheel_speed_limit() const;
  /// Forward speed limit, m/s.
  double max_speed() const;
  /// Yaw-rate limit with both sides at opposite wheel limits, rad/s.
  double max_yaw_rate() const;
  /// Effective (slip-widened) track width.
  double effective_track() const { return slip_widening_factor * track_width; }
  /// Wheel-shaft angle per hall tick.
  double tick_quantum_rad() const;
  /// Ground distance per hall tick.
  double tick_quantum_m() const { return tick_quantum_rad() * wheel_radius; }

  friend bool operator==(const RobotParams&, const RobotParams&) = default;
};

enum class SurfaceKind { kSand, kClay, kCrevice, kPavement };

std::string_view to_string(SurfaceKind k);

struct SurfaceParams {
  SurfaceKind kind = SurfaceKind::kSand;
  double mu = 0.6;    // Coulomb friction
  double c_rr = 0.2;  // rolling resistance

  friend bool operator==(const SurfaceParams&, const SurfaceParams&) = default;
};

namespace surfaces {
inline constexpr SurfaceParams kSand{SurfaceKind::kSand, 0.6, 0.2};
inline constexpr SurfaceParams kClay{SurfaceKind::kClay, 0.55, 0.08};
inline constexpr SurfaceParams kPavement{SurfaceKind::kPavement, 0.9, 0.015};
/// Crevice over a base soil: half the grip, double the rolling resistance.
SurfaceParams crevice_over(const SurfaceParams& base);
}  // namespace surfaces

enum class HeightClass { kH1 = 1, kH2 = 2, kH3 = 3 };

std::string_view to_string(HeightClass h);
HeightClass parse_height_class(std::string_view s);
inline double plant_height_m(HeightClass h) { return static_cast<double>(static_cast<int>(h)); }

enum class GroundKind { kField, kPavement };

struct SunState {
  double azimuth = 0.0;           // rad, world frame, counter-clockwise from +x
  double elevation = deg2rad(70.0);
  double cloud_factor = 1.0;      // 1 = full sun

  friend bool operator==(const SunState&, const SunState&) = default;
};

using Polygon = std::vector<Vec2>;

bool point_in_polygon(const Polygon& poly, Vec2 p);

/// Inputs to tunnel generation. Row geometry is not measured in the field;
/// these defaults let a 0.8 m body pass H1/H2 rows and make H3 tight.
struct ScenarioSpec {
  std::uint64_t seed = 0;
  double length_m = 50.0;
  double row_spacing_m = 1.5;
  HeightClass height_class = HeightClass::kH1;
  double stem_pitch_m = 0.5;
  double stem_jitter_m = 0.05;
  double stem_radius_m = 0.015;
  double stem_radius_jitter = 0.2;  // fraction of stem_radius_m
  double canopy_overhang_m = 0.3;   // used only for H3
  double canopy_bottom_m = 0.8;
  double sand_fraction = 0.667;
  double surface_cell_m = 0.1;
  double bounds_margin_m = 5.0;
  GroundKind ground = GroundKind::kField;
  std::vector<Polygon> crevices;
  SunState sun;

  static ScenarioSpec from_config(const KvConfig& cfg);
  void write_config(KvConfig& cfg) const;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct Stem {
  Vec2 center;
  double radius = 0.0;

  friend bool operator==(const Stem&, const Stem&) = default;
};

/// Axis-aligned rectangle of overhanging leaves. Soft: perturbs sensing only.
struct CanopyRect {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

  bool contains(Vec2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
  friend bool operator==(const CanopyRect&, const CanopyRect&) = default;
};

struct Bounds {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
  bool contains(Vec2 p) const { return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max; }
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

/// A straight tunnel along +x between two plant rows at y = ±row_spacing/2.
/// Immutable after generation.
struct TunnelScenario {
  double row_spacing = 0.0;
  double tunnel_length = 0.0;
  HeightClass plant_height_class = HeightClass::kH1;
  std::vector<Stem> stems_left;   // sorted by x
  std::vector<Stem> stems_right;  // sorted by x
  double canopy_overhang = 0.0;
  double canopy_bottom = 0.0;
  std::vector<CanopyRect> canopy;
  std::vector<Polygon> crevices;
  double sand_fraction = 0.0;
  double surface_cell = 0.1;
  GroundKind ground = GroundKind::kField;
  double stem_jitter = 0.0;
  Bounds bounds;
  SunState sun;
  std::uint64_t seed = 0;

  double plant_height() const { return plant_height_m(plant_height_class); }
  double max_stem_radius() const;

  friend bool operator==(const TunnelScenario&, const TunnelScenario&) = default;
};

TunnelScenario generate_tunnel(std::uint64_t seed, const ScenarioSpec& spec);

/// Surface under a world point. Throws OutOfBounds outside scenario bounds.
SurfaceParams surface_at(const TunnelScenario& scenario, Vec2 point);

/// Canonical text form; equal scenarios serialize to equal bytes.
std::string serialize(const TunnelScenario& scenario);

}  // namespace tiba
