#include "tiba/drivetrain.hpp"

#include <cstdio>
#include <numbers>

#include "tiba/error.hpp"

namespace tiba {

SizingReport sizing_report(const RobotParams& p, const SurfaceParams& worst, double g) {
  if (!(g > 0.0)) throw InvalidParams("g must be positive");
  if (p.mass < 0.0 || worst.mu < 0.0 || p.wheel_radius < 0.0 || p.motor_rated_torque < 0.0) {
    throw InvalidParams("sizing inputs must be nonnegative");
  }

  SizingReport r;
  r.normal_force_per_wheel = p.mass * g / 4.0;
  r.friction_force_per_wheel = r.normal_force_per_wheel * worst.mu;
  r.torque_per_wheel = r.friction_force_per_wheel * p.wheel_radius;
  r.required_side_torque = 2.0 * r.torque_per_wheel;
  r.gearbox_output_torque = p.gear_ratio * p.motor_rated_torque;
  r.torque_margin = r.gearbox_output_torque - r.required_side_torque;
  r.max_linear_speed = max_linear_speed(p.motor_free_speed, p.gear_ratio, p.wheel_radius);
  r.feasible = r.gearbox_output_torque >= r.required_side_torque;
  return r;
}

double max_linear_speed(double free_speed_rpm, double gear_ratio, double wheel_radius) {
  if (gear_ratio == 0.0) throw DivisionByZero("gear_ratio is zero");
  if (free_speed_rpm < 0.0 || gear_ratio < 0.0 || wheel_radius < 0.0) {
    throw InvalidParams("speed inputs must be nonnegative");
  }
  return 2.0 * std::numbers::pi * (free_speed_rpm / gear_ratio) * wheel_radius / 60.0;
}

std::string format_table(const SizingReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof(buf),
                "%-32s %12.4f %s\n%-32s %12.4f %s\n%-32s %12.4f %s\n%-32s %12.4f %s\n"
                "%-32s %12.4f %s\n%-32s %12.4f %s\n%-32s %12.4f %s (%.2f km/h)\n%-32s %12s\n",
                "normal force per wheel", r.normal_force_per_wheel, "N",
                "friction force per wheel", r.friction_force_per_wheel, "N",
                "torque per wheel", r.torque_per_wheel, "N.m",
                "required torque per side", r.required_side_torque, "N.m",
                "gearbox output torque", r.gearbox_output_torque, "N.m",
                "torque margin", r.torque_margin, "N.m",
                "max linear speed", r.max_linear_speed, "m/s", r.max_linear_speed * 3.6,
                "feasible", r.feasible ? "yes" : "no");
  return buf;
}

std::string format_key_values(const SizingReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof(buf),
                "normal_force_per_wheel=%.17g\nfriction_force_per_wheel=%.17g\ntorque_per_wheel=%.17g\n"
                "required_side_torque=%.17g\ngearbox_output_torque=%.17g\ntorque_margin=%.17g\n"
                "max_linear_speed=%.17g\nmax_linear_speed_kmh=%.17g\nfeasible=%s\n",
                r.normal_force_per_wheel, r.friction_force_per_wheel, r.torque_per_wheel, r.required_side_torque,
                r.gearbox_output_torque, r.torque_margin, r.max_linear_speed, r.max_linear_speed * 3.6,
                r.feasible ? "true" : "false");
  return buf;
}

}  // namespace tiba
