#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tiba/kv_config.hpp"
#include "tiba/nav.hpp"
#include "tiba/pipeline.hpp"
#include "tiba/runlog.hpp"
#include "tiba/sensors.hpp"
#include "tiba/simcore.hpp"
#include "tiba/world.hpp"

namespace tiba {

enum class NavMode { kTeleop, kThermal, kLidar, kWaypoint };

std::string_view to_string(NavMode m);
NavMode parse_nav_mode(std::string_view s);

struct NavConfig {
  NavMode mode = NavMode::kThermal;
  SteerGains gains;
  double v_ref = 0.8;
  WaypointConfig waypoint;
  ThermalCenterlineConfig thermal;
  LidarCorridorConfig lidar;
  double hold_s = 0.5;           // keep the last command this long after losing the corridor
  std::vector<Vec2> waypoints;   // empty: straight centerline from start to goal
  double heading_elevation_max = deg2rad(85.0);
};

/// Everything a run needs. Round-trips through the flat key/value format.
struct RunConfig {
  ScenarioSpec scenario;
  RobotParams robot;
  NavConfig nav;
  LidarConfig lidar;
  ThermalConfig thermal;
  SolarSensorConfig solar;
  VssConfig vss;
  TeleopConfig teleop;
  Ambient ambient;

  double dt = kStepDt;
  double duration_s = 120.0;
  Pose2D start{0.5, 0.0, 0.0};
  double start_jitter_m = 0.0;
  double start_jitter_rad = 0.0;
  double exit_margin_m = 3.0;  // goal line this far before the end of the rows
  double heartbeat_timeout_s = 0.25;
  double ht_sigma_t = 0.2;
  double ht_sigma_h = 1.0;

  int control_every = 5;   // steps
  int lidar_every = 5;
  int thermal_every = 10;
  int solar_every = 100;
  int ht_every = 100;
  int vss_log_every = 10;
  int telemetry_every = 10;
  int log_lidar_every = 20;
  int log_thermal_every = 100;

  std::uint64_t seed() const { return scenario.seed; }
  double goal_x() const { return scenario.length_m - exit_margin_m; }

  static RunConfig from_config(const KvConfig& cfg);
  static RunConfig load(const std::filesystem::path& path);
  KvConfig to_config() const;
};

struct RunMetrics {
  double cross_track_rms = 0.0;
  double cross_track_max = 0.0;
  int stem_collisions = 0;
  double distance_traveled = 0.0;
  bool completion = false;
  double energy_used_wh = 0.0;

  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

std::string format_metrics(const RunMetrics& m);

/// Stems touching the body rectangle at `pose`.
std::vector<const Stem*> body_contacts(const TunnelScenario& scene, const RobotParams& robot, const Pose2D& pose);

/// Metrics from a log alone (the header carries the scenario). Throws
/// ConfigError for an empty log.
RunMetrics compute_metrics(const RunLog& log);

/// Physical side of the stack: drive chain, motors, pose, hall odometry and
/// power. Shared by live runs and replays so both step identically.
class DriveCore {
 public:
  DriveCore(const RunConfig& cfg, const TunnelScenario& scene, const Pose2D& start, const OdometryEstimate& odom);

  /// twist_converter + drive chain: setpoint → wheel speeds → bus frame → drivers.
  void apply_setpoint(const Twist& setpoint);

  struct StepOutput {
    PoseRec pose;
    WheelRec wheel;
    RunRecord vss;
  };
  /// Advances one dt. Throws OutOfBounds if a track leaves the scenario.
  StepOutput step(std::span<const RelayCommand> relays, double t_next, std::uint64_t step_next);

  const Pose2D& pose() const { return pose_; }
  const OdometryEstimate& odometry() const { return odom_; }
  const VssState& vss() const { return vss_; }
  const Twist& setpoint() const { return setpoint_; }
  const WheelSpeeds& motor_command() const { return motor_cmd_; }
  Twist actual_twist() const { return actual_; }
  const BusFrame& last_frame() const { return frame_; }

 private:
  const RunConfig& cfg_;
  const TunnelScenario& scene_;
  Pose2D pose_;
  OdometryEstimate odom_;
  DriveState drive_;
  VssState vss_;
  Twist setpoint_;
  WheelSpeeds motor_cmd_;
  BusFrame frame_;
  Twist actual_;
};

/// Immutable copy handed to the telemetry service.
struct TelemetrySnapshot {
  double t = 0.0;
  Pose2D pose;
  Twist actual;
  Twist setpoint;
  NavMode mode = NavMode::kThermal;
  std::optional<LidarScan> scan;
  std::optional<ThermalRec> thermal;
  VssState vss;
  std::vector<EventRec> events;
};

using TelemetrySink = std::function<void(std::shared_ptr<const TelemetrySnapshot>)>;

/// A full run: sensors, navigation executive, drive chain, power and the run
/// log. Stepping happens on one thread; submit_* may be called from others
/// and take effect at the next step.
class Simulation {
 public:
  explicit Simulation(RunConfig cfg);

  void step();
  bool finished() const { return finished_; }
  void run_to_end();

  void submit_teleop(const TeleopInput& input);
  void submit_relay(std::string name, bool on);
  void submit_mode(NavMode mode);
  /// Drops the teleop heartbeat at once (used when the operator disconnects).
  void submit_disconnect();

  void set_telemetry_sink(TelemetrySink sink) { sink_ = std::move(sink); }

  const RunConfig& config() const { return cfg_; }
  const TunnelScenario& scenario() const { return scene_; }
  const RunLog& log() const { return log_; }
  double time() const { return static_cast<double>(step_) * cfg_.dt; }
  std::uint64_t step_index() const { return step_; }
  const Pose2D& pose() const { return core_->pose(); }
  const Twist& setpoint() const { return core_->setpoint(); }
  NavMode mode() const { return mode_; }
  const VssState& vss() const { return core_->vss(); }

 private:
  struct Pending {
    std::vector<TeleopInput> teleop;
    std::vector<RelayCommand> relays;
    std::optional<NavMode> mode;
    bool disconnect = false;
  };

  void emit(RecordPayload payload);
  void emit_event(std::string_view name, std::string detail);
  void sense();
  Twist control();
  void publish_telemetry();
  void finish(std::string_view reason);

  RunConfig cfg_;
  TunnelScenario scene_;
  std::unique_ptr<DriveCore> core_;
  RunLog log_;
  std::uint64_t step_ = 0;
  bool finished_ = false;
  NavMode mode_;

  std::vector<Vec2> path_;
  std::size_t path_progress_ = 0;
  TeleopMapper teleop_;
  TeleopInput teleop_input_;
  double teleop_last_t_ = -1e9;

  std::optional<CorridorEstimate> estimate_;
  double estimate_t_ = -1e9;
  bool lost_reported_ = false;
  std::optional<LidarScan> last_scan_;
  std::optional<ThermalRec> last_thermal_;
  std::vector<EventRec> pending_events_;

  std::mutex inbox_mutex_;
  Pending inbox_;
  TelemetrySink sink_;
};

struct RunResult {
  RunLog log;
  RunMetrics metrics;
};

/// Runs to completion; writes the log when `log_path` is given.
RunResult run_scenario(const RunConfig& cfg, const std::optional<std::filesystem::path>& log_path = std::nullopt);

struct ReplayResult {
  RunLog log;                 // original log with physical records regenerated
  bool identical = false;
  std::optional<std::uint64_t> first_mismatch_step;
};

/// Re-drives the physical stack from the logged commands and compares every
/// regenerated pose, wheel and power record with the logged one.
ReplayResult replay(const RunLog& original);

}  // namespace tiba
