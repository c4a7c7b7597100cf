#pragma once

#include <string>

#include "tiba/world.hpp"

namespace tiba {

/// Torque and speed sizing for one side of the skid-steer drive: each motor
/// turns the two wheels of its side through the gearbox and belt.
struct SizingReport {
  double normal_force_per_wheel = 0.0;    // N
  double friction_force_per_wheel = 0.0;  // N
  double torque_per_wheel = 0.0;          // N·m
  double required_side_torque = 0.0;      // N·m, both wheels of a side
  double gearbox_output_torque = 0.0;     // N·m
  double torque_margin = 0.0;             // N·m
  double max_linear_speed = 0.0;          // m/s
  bool feasible = false;

  friend bool operator==(const SizingReport&, const SizingReport&) = default;
};

/// Worst-case static-friction sizing with an equal four-wheel load split.
/// Rolling resistance is deliberately not part of the sizing force.
/// Unlike RobotParams::validate, a zero mass is accepted (all loads zero).
SizingReport sizing_report(const RobotParams& params, const SurfaceParams& worst_surface,
                           double g = kStandardGravity);

/// v = 2π·(free_speed/gear_ratio)·wheel_radius/60. Throws DivisionByZero for a
/// zero gear ratio.
double max_linear_speed(double free_speed_rpm, double gear_ratio, double wheel_radius);

/// Aligned human-readable table.
std::string format_table(const SizingReport& r);
/// One `key=value` line per field.
std::string format_key_values(const SizingReport& r);

}  // namespace tiba
