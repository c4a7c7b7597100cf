#include "tiba/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "tiba/error.hpp"

namespace tiba {

std::string_view to_string(GainStep g) {
  switch (g) {
    case GainStep::kNone: return "none";
    case GainStep::kUp: return "up";
    case GainStep::kDown: return "down";
  }
  return "none";
}

GainStep parse_gain_step(std::string_view s) {
  if (s == "up") return GainStep::kUp;
  if (s == "down") return GainStep::kDown;
  if (s == "none" || s.empty()) return GainStep::kNone;
  throw ConfigError("unknown gain_step: " + std::string(s));
}

TeleopMapper::TeleopMapper(TeleopConfig cfg) : cfg_(cfg), dv_(cfg.dv), domega_(cfg.domega) {}

Twist TeleopMapper::map(const TeleopInput& input, const Twist& prev) {
  if (input.gain_step == GainStep::kUp) {
    dv_ *= cfg_.gain_factor;
    domega_ *= cfg_.gain_factor;
  } else if (input.gain_step == GainStep::kDown) {
    dv_ /= cfg_.gain_factor;
    domega_ /= cfg_.gain_factor;
  }
  if (!input.deadman) return {};

  const double fwd = std::clamp(input.axis_forward, -1.0, 1.0);
  const double turn = std::clamp(input.axis_turn, -1.0, 1.0);
  return {std::clamp(prev.v + fwd * dv_, -cfg_.v_max, cfg_.v_max),
          std::clamp(prev.omega + turn * domega_, -cfg_.omega_max, cfg_.omega_max)};
}

namespace {

void put_i32_le(std::uint8_t* out, std::int32_t v) {
  const auto u = static_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>((u >> (8 * i)) & 0xFFu);
}

std::int32_t get_i32_le(const std::uint8_t* in) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(in[i]) << (8 * i);
  return static_cast<std::int32_t>(u);
}

std::int32_t to_milli(double rad_s) {
  const double m = std::round(rad_s * 1000.0);
  if (!(std::abs(m) <= 2147483647.0)) throw InvalidParams("wheel speed out of frame range");
  return static_cast<std::int32_t>(m);
}

}  // namespace

BusFrame encode_wheel_command(const WheelSpeeds& w, std::uint16_t id) {
  if (id >= 2048) throw InvalidParams("frame id must fit in 11 bits");
  BusFrame f;
  f.id = id;
  f.dlc = 8;
  put_i32_le(f.data.data(), to_milli(w.left));
  put_i32_le(f.data.data() + 4, to_milli(w.right));
  return f;
}

WheelSpeeds decode_wheel_command(const BusFrame& f) {
  if (f.dlc != 8) throw MalformedFrame("wheel command payload must be 8 bytes, got " + std::to_string(f.dlc));
  return {get_i32_le(f.data.data()) / 1000.0, get_i32_le(f.data.data() + 4) / 1000.0};
}

// ---------------------------------------------------------------------------

const VssDevice* VssConfig::device(std::string_view name) const {
  for (const auto& d : devices) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

bool VssState::relay(std::string_view name) const {
  const auto it = relays.find(name);
  return it != relays.end() && it->second;
}

namespace {

double pack_voltage(double soc, const VssConfig& cfg) {
  return cfg.pack_empty_v + soc * (cfg.pack_full_v - cfg.pack_empty_v);
}

double enclosure_humidity(double ambient_rh, double internal_t, double ambient_t) {
  // Sealed box: absolute humidity is fixed, relative humidity drops ~6 %/°C.
  return std::clamp(ambient_rh * std::exp(-0.06 * (internal_t - ambient_t)), 0.0, 100.0);
}

}  // namespace

VssState initial_vss_state(const VssConfig& cfg, const Ambient& ambient, double soc) {
  VssState s;
  s.state_of_charge = soc;
  s.battery_voltage = pack_voltage(soc, cfg);
  s.relays.emplace(std::string(kDriveRelay), true);
  for (const auto& d : cfg.devices) s.relays.emplace(d.name, d.on_by_default);
  s.internal_temp = ambient.temperature;
  s.internal_humidity = enclosure_humidity(ambient.humidity, ambient.temperature, ambient.temperature);
  s.bus12_current = cfg.computer_idle_a;
  for (const auto& d : cfg.devices) {
    if (d.bus == PowerBus::k12V && s.relay(d.name)) s.bus12_current += d.amps;
  }
  return s;
}

double bus_power_w(const VssState& s, const VssConfig& cfg) {
  return cfg.bus48_v * s.bus48_current + cfg.bus12_v * s.bus12_current;
}

VssStepResult vss_step(const VssState& state, std::span<const RelayCommand> relay_cmds, const VssLoad& load,
                       const VssConfig& cfg, const Ambient& ambient, double dt, double t, std::uint64_t step) {
  if (!(dt > 0.0)) throw InvalidParams("dt must be positive");
  VssState s = state;
  for (const auto& cmd : relay_cmds) {
    if (cmd.name != kDriveRelay && cfg.device(cmd.name) == nullptr) throw ConfigError("unknown relay: " + cmd.name);
    s.relays[cmd.name] = cmd.on;
  }

  const bool powered = !s.exhausted;
  s.bus12_current = 0.0;
  s.bus48_current = 0.0;
  if (powered) {
    s.bus12_current = cfg.computer_idle_a;
    for (const auto& d : cfg.devices) {
      if (!s.relay(d.name)) continue;
      (d.bus == PowerBus::k12V ? s.bus12_current : s.bus48_current) += d.amps;
    }
    if (s.relay(kDriveRelay)) {
      s.bus48_current += cfg.driver_idle_a +
                         std::max(0.0, load.motor_mech_power_w) / (cfg.motor_efficiency * cfg.bus48_v);
    }
  }

  const double power = bus_power_w(s, cfg);
  const double energy_wh = power * dt / 3600.0;
  s.energy_used_wh += energy_wh;
  s.state_of_charge -= energy_wh / cfg.capacity_wh();

  RunRecord rec{t, step, VssState{}};
  bool just_exhausted = false;
  if (s.state_of_charge <= 0.0 && !s.exhausted) {
    s.state_of_charge = 0.0;
    s.exhausted = true;
    just_exhausted = true;
  }
  s.state_of_charge = std::max(0.0, s.state_of_charge);
  s.battery_voltage = pack_voltage(s.state_of_charge, cfg);

  const double target = ambient.temperature + cfg.enclosure_rise_per_w * power;
  s.internal_temp += (target - s.internal_temp) * (1.0 - std::exp(-dt / cfg.enclosure_tau_s));
  s.internal_humidity = enclosure_humidity(ambient.humidity, s.internal_temp, ambient.temperature);

  if (just_exhausted) {
    rec.payload = EventRec{std::string(events::kPowerExhausted), "state of charge reached zero"};
  } else {
    rec.payload = s;
  }
  return {s, rec};
}

// ---------------------------------------------------------------------------

std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::kCommand: return "command";
    case RecordKind::kPose: return "pose";
    case RecordKind::kWheel: return "wheel";
    case RecordKind::kSolar: return "solar";
    case RecordKind::kLidar: return "lidar";
    case RecordKind::kThermal: return "thermal";
    case RecordKind::kHt: return "ht";
    case RecordKind::kVss: return "vss";
    case RecordKind::kEvent: return "event";
  }
  return "?";
}

RecordKind parse_record_kind(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(RecordKind::kEvent); ++i) {
    const auto k = static_cast<RecordKind>(i);
    if (to_string(k) == s) return k;
  }
  throw CorruptLog("unknown record kind: " + std::string(s));
}

ThermalRec ThermalRec::from_image(const ThermalImage& img) {
  ThermalRec r;
  r.width = img.width;
  r.height = img.height;
  if (img.temps.empty()) return r;
  const auto [lo, hi] = std::minmax_element(img.temps.begin(), img.temps.end());
  r.min_c = *lo;
  r.max_c = *hi;
  const double span = r.max_c - r.min_c;
  r.pixels.reserve(img.temps.size());
  for (double t : img.temps) {
    r.pixels.push_back(span > 0.0 ? static_cast<std::uint8_t>(std::lround(255.0 * (t - r.min_c) / span)) : 0);
  }
  return r;
}

}  // namespace tiba
