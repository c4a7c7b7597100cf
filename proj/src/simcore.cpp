#include "tiba/simcore.hpp"

#include <algorithm>
#include <cmath>

#include "tiba/error.hpp"

namespace tiba {

WheelSpeeds twist_to_wheel_speeds(const Twist& t, const RobotParams& p) {
  const double half_track = p.effective_track() / 2.0;
  WheelSpeeds w{(t.v - t.omega * half_track) / p.wheel_radius, (t.v + t.omega * half_track) / p.wheel_radius};
  const double limit = p.wheel_speed_limit();
  const double peak = std::max(std::abs(w.left), std::abs(w.right));
  if (peak > limit) {
    const double s = limit / peak;
    w.left *= s;
    w.right *= s;
  }
  return w;
}

Twist wheel_speeds_to_twist(const WheelSpeeds& w, const RobotParams& p) {
  const double vl = w.left * p.wheel_radius;
  const double vr = w.right * p.wheel_radius;
  return {(vl + vr) / 2.0, (vr - vl) / p.effective_track()};
}

Pose2D integrate_pose(const Pose2D& pose, const Twist& t, double dt) {
  Pose2D out = pose;
  if (std::abs(t.omega) < kStraightEpsilon) {
    out.x += t.v * dt * std::cos(pose.theta);
    out.y += t.v * dt * std::sin(pose.theta);
    out.theta = normalize_angle(pose.theta + t.omega * dt);
    return out;
  }
  const double th1 = pose.theta + t.omega * dt;
  const double r = t.v / t.omega;
  out.x += r * (std::sin(th1) - std::sin(pose.theta));
  out.y += r * (std::cos(pose.theta) - std::cos(th1));
  out.theta = normalize_angle(th1);
  return out;
}

namespace {

struct SideResult {
  MotorSideState state;
  std::int64_t ticks = 0;
  double torque = 0.0;
  double mean_speed = 0.0;
};

double sign_of(double v) { return (v > 0.0) - (v < 0.0); }

SideResult step_side(const MotorSideState& s, double cmd, const SurfaceParams& surface, const RobotParams& p,
                     double dt) {
  const double wheel_load = p.mass * kStandardGravity / 4.0;
  const double inertia = 0.5 * p.mass * p.wheel_radius * p.wheel_radius;  // half the body per side
  const double resist = 2.0 * surface.c_rr * wheel_load * p.wheel_radius;
  const double traction = 2.0 * surface.mu * wheel_load * p.wheel_radius;
  const double available = std::min(p.gear_ratio * p.motor_rated_torque, traction);

  const double desired = s.speed + (cmd - s.speed) * (1.0 - std::exp(-dt / p.motor_time_constant));
  const double delta = desired - s.speed;
  const double motion = s.speed != 0.0 ? sign_of(s.speed) : sign_of(delta);

  const double required = inertia * delta / dt + resist * motion;
  const double applied = std::clamp(required, -available, available);

  double next = desired;
  if (applied != required) {
    next = s.speed + (applied - resist * motion) * dt / inertia;
    // Resistance alone never reverses the direction of motion.
    if (sign_of(next - s.speed) != sign_of(delta) && sign_of(next) != motion) next = 0.0;
  }

  SideResult r;
  r.torque = applied;
  r.mean_speed = 0.5 * (s.speed + next);
  r.state.speed = next;

  const double ticks_exact = s.tick_residual + r.mean_speed * dt / p.tick_quantum_rad();
  r.ticks = std::llround(ticks_exact);
  r.state.tick_residual = ticks_exact - static_cast<double>(r.ticks);
  r.state.hall_ticks = s.hall_ticks + r.ticks;
  return r;
}

}  // namespace

MotorStepResult step_motors(const DriveState& state, const WheelSpeeds& cmd, const SurfaceParams& left_surface,
                            const SurfaceParams& right_surface, const RobotParams& p, double dt) {
  if (!(dt > 0.0) || dt > 0.1) throw InvalidParams("dt must be in (0, 0.1]");
  const auto l = step_side(state.left, cmd.left, left_surface, p, dt);
  const auto r = step_side(state.right, cmd.right, right_surface, p, dt);
  MotorStepResult out;
  out.state = {l.state, r.state};
  out.ticks_left = l.ticks;
  out.ticks_right = r.ticks;
  out.torque_left = l.torque;
  out.torque_right = r.torque;
  out.mean_speeds = {l.mean_speed, r.mean_speed};
  return out;
}

}  // namespace tiba
