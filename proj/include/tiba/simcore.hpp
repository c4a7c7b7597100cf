#pragma once

#include <cstdint>

#include "tiba/types.hpp"
#include "tiba/world.hpp"

namespace tiba {

inline constexpr double kStepDt = 0.01;  // s
inline constexpr double kStraightEpsilon = 1e-9;  // rad/s

/// Differential side speeds for a twist on a skid-steer base. If either side
/// would exceed the wheel speed limit both are scaled by the same factor, so
/// the turning radius is kept.
WheelSpeeds twist_to_wheel_speeds(const Twist& t, const RobotParams& p);

/// Algebraic inverse of twist_to_wheel_speeds (without the limit scaling).
Twist wheel_speeds_to_twist(const WheelSpeeds& w, const RobotParams& p);

/// Exact constant-twist arc integration over dt.
Pose2D integrate_pose(const Pose2D& pose, const Twist& t, double dt);

/// One side of the drive: shared wheel speed and cumulative hall count.
struct MotorSideState {
  double speed = 0.0;             // rad/s, wheel shaft
  std::int64_t hall_ticks = 0;    // motor shaft, cumulative
  double tick_residual = 0.0;     // fractional tick carried to the next step

  friend bool operator==(const MotorSideState&, const MotorSideState&) = default;
};

struct DriveState {
  MotorSideState left;
  MotorSideState right;

  friend bool operator==(const DriveState&, const DriveState&) = default;
};

struct MotorStepResult {
  DriveState state;
  std::int64_t ticks_left = 0;
  std::int64_t ticks_right = 0;
  double torque_left = 0.0;    // N·m delivered at the gearbox output
  double torque_right = 0.0;
  WheelSpeeds mean_speeds;     // average over the step, used for pose integration
};

/// First-order response toward `cmd` with time constant
/// RobotParams::motor_time_constant. The per-step change is bounded by the
/// gearbox torque (or the traction limit, whichever is lower) acting against
/// rolling resistance. Hall ticks are emitted by rounding the accumulated
/// motor-shaft angle and carrying the remainder.
MotorStepResult step_motors(const DriveState& state, const WheelSpeeds& cmd, const SurfaceParams& left_surface,
                            const SurfaceParams& right_surface, const RobotParams& p, double dt);

}  // namespace tiba
