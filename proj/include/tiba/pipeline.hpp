#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tiba/sensors.hpp"
#include "tiba/types.hpp"
#include "tiba/world.hpp"

namespace tiba {

// Topic names of the drive node graph.
namespace topics {
inline constexpr std::string_view kTeleopBox = "teleop_box";
inline constexpr std::string_view kTwistConverter = "twist_converter";
inline constexpr std::string_view kDriveChain = "saga_base_drive_chain";
inline constexpr std::string_view kVss = "vss";
}  // namespace topics

// ---------------------------------------------------------------------------
// Teleoperation

enum class GainStep { kNone, kUp, kDown };

std::string_view to_string(GainStep g);
GainStep parse_gain_step(std::string_view s);

struct TeleopInput {
  double axis_forward = 0.0;  // [-1, 1]
  double axis_turn = 0.0;     // [-1, 1], positive turns left
  bool deadman = false;
  GainStep gain_step = GainStep::kNone;

  friend bool operator==(const TeleopInput&, const TeleopInput&) = default;
};

struct TeleopConfig {
  double dv = 0.02;       // m/s per tick at full axis
  double domega = 0.05;   // rad/s per tick at full axis
  double gain_factor = 1.25;
  double v_max = 1.2566370614359172;
  double omega_max = 1.0;
};

/// Joystick mapping as velocity increments. Releasing the deadman zeroes the
/// setpoint at once; gain steps scale the increments, not the setpoint.
class TeleopMapper {
 public:
  explicit TeleopMapper(TeleopConfig cfg = {});

  Twist map(const TeleopInput& input, const Twist& prev);

  double dv() const { return dv_; }
  double domega() const { return domega_; }
  const TeleopConfig& config() const { return cfg_; }

 private:
  TeleopConfig cfg_;
  double dv_;
  double domega_;
};

// ---------------------------------------------------------------------------
// Bus frames

inline constexpr std::uint16_t kWheelCommandId = 0x201;

struct BusFrame {
  std::uint16_t id = 0;  // 11-bit
  std::uint8_t dlc = 0;  // payload length, <= 8
  std::array<std::uint8_t, 8> data{};

  friend bool operator==(const BusFrame&, const BusFrame&) = default;
};

/// Payload: left then right wheel speed as signed 32-bit little-endian
/// milli-rad/s.
BusFrame encode_wheel_command(const WheelSpeeds& w, std::uint16_t id = kWheelCommandId);
/// Throws MalformedFrame unless the payload is exactly 8 bytes.
WheelSpeeds decode_wheel_command(const BusFrame& f);

/// FIFO per topic with one producer.
template <typename T>
class Topic {
 public:
  explicit Topic(std::string_view name) : name_(name) {}
  void publish(T msg) { queue_.push_back(std::move(msg)); }
  std::optional<T> take() {
    if (queue_.empty()) return std::nullopt;
    T msg = std::move(queue_.front());
    queue_.pop_front();
    return msg;
  }
  bool empty() const { return queue_.empty(); }
  std::string_view name() const { return name_; }

 private:
  std::string_view name_;
  std::deque<T> queue_;
};

// ---------------------------------------------------------------------------
// Vehicle support system (relays, power, enclosure climate)

enum class PowerBus { k12V, k48V };

struct VssDevice {
  std::string name;
  PowerBus bus = PowerBus::k12V;
  double amps = 0.0;
  bool on_by_default = true;
};

struct VssConfig {
  double capacity_ah = 30.0;
  double pack_nominal_v = 48.0;
  double pack_full_v = 52.0;
  double pack_empty_v = 42.0;
  double bus48_v = 48.0;
  double bus12_v = 12.0;
  double computer_idle_a = 2.0;    // 12 V, not switchable
  double driver_idle_a = 0.2;      // 48 V, behind the "drive" relay
  double motor_efficiency = 0.8;
  double enclosure_rise_per_w = 0.02;  // °C per W at equilibrium
  double enclosure_tau_s = 300.0;
  std::vector<VssDevice> devices = {
      {"lidar", PowerBus::k12V, 0.5, true},
      {"thermal_camera", PowerBus::k12V, 0.3, true},
      {"sun_sensor", PowerBus::k12V, 0.02, true},
      {"ht_sensor", PowerBus::k12V, 0.01, true},
      {"lights", PowerBus::k12V, 1.5, false},
  };

  double capacity_wh() const { return capacity_ah * pack_nominal_v; }
  const VssDevice* device(std::string_view name) const;
};

/// Name of the relay that powers the motor drivers.
inline constexpr std::string_view kDriveRelay = "drive";

struct VssState {
  double battery_voltage = 0.0;
  double state_of_charge = 1.0;
  double bus48_current = 0.0;
  double bus12_current = 0.0;
  std::map<std::string, bool, std::less<>> relays;
  double internal_temp = 0.0;
  double internal_humidity = 0.0;
  double energy_used_wh = 0.0;
  bool exhausted = false;

  bool relay(std::string_view name) const;
  friend bool operator==(const VssState&, const VssState&) = default;
};

VssState initial_vss_state(const VssConfig& cfg, const Ambient& ambient, double soc = 1.0);

/// Loads seen by the VSS during a step.
struct VssLoad {
  double motor_mech_power_w = 0.0;  // positive mechanical output of both sides
};

// ---------------------------------------------------------------------------
// Run records

enum class RecordKind { kCommand, kPose, kWheel, kSolar, kLidar, kThermal, kHt, kVss, kEvent };

std::string_view to_string(RecordKind k);
RecordKind parse_record_kind(std::string_view s);

struct CommandRec {
  std::string source;  // topic that produced the command
  Twist setpoint;
  std::string relay;   // non-empty for a relay switch
  bool relay_on = false;

  bool is_relay() const { return !relay.empty(); }
  friend bool operator==(const CommandRec&, const CommandRec&) = default;
};

struct PoseRec {
  Pose2D truth;
  OdometryEstimate odom;
  friend bool operator==(const PoseRec&, const PoseRec&) = default;
};

struct WheelRec {
  WheelSpeeds command;
  WheelSpeeds actual;
  std::int64_t hall_left = 0;
  std::int64_t hall_right = 0;
  friend bool operator==(const WheelRec&, const WheelRec&) = default;
};

/// 8-bit thumbnail: value = round(255·(T − min)/(max − min)).
struct ThermalRec {
  int width = 0;
  int height = 0;
  double min_c = 0.0;
  double max_c = 0.0;
  std::vector<std::uint8_t> pixels;

  static ThermalRec from_image(const ThermalImage& img);
  friend bool operator==(const ThermalRec&, const ThermalRec&) = default;
};

struct EventRec {
  std::string name;
  std::string detail;
  friend bool operator==(const EventRec&, const EventRec&) = default;
};

namespace events {
inline constexpr std::string_view kGoalReached = "goal_reached";
inline constexpr std::string_view kPowerExhausted = "PowerExhausted";
inline constexpr std::string_view kNavLost = "nav_lost";
inline constexpr std::string_view kOutOfBounds = "out_of_bounds";
inline constexpr std::string_view kHeadingFix = "heading_fix";
inline constexpr std::string_view kModeChange = "mode";
}  // namespace events

using RecordPayload =
    std::variant<CommandRec, PoseRec, WheelRec, SolarReading, LidarScan, ThermalRec, HTReading, VssState, EventRec>;

struct RunRecord {
  double t = 0.0;          // sim time, s
  std::uint64_t step = 0;  // sim step index
  RecordPayload payload;

  RecordKind kind() const { return static_cast<RecordKind>(payload.index()); }
  template <typename T>
  const T* as() const {
    return std::get_if<T>(&payload);
  }
  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct RelayCommand {
  std::string name;
  bool on = false;
};

struct VssStepResult {
  VssState state;
  RunRecord telemetry;  // kVss normally, kEvent "PowerExhausted" on depletion
};

/// Applies relay commands, then advances the power model by dt. Bus currents
/// are the sums of enabled devices (12 V) and driver idle plus motor
/// electrical draw (48 V). Throws ConfigError for an unknown relay.
VssStepResult vss_step(const VssState& state, std::span<const RelayCommand> relay_cmds, const VssLoad& load,
                       const VssConfig& cfg, const Ambient& ambient, double dt, double t = 0.0,
                       std::uint64_t step = 0);

/// Electrical power drawn from the pack for a state, W.
double bus_power_w(const VssState& s, const VssConfig& cfg);

}  // namespace tiba
