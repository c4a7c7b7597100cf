#include "tiba/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "tiba/error.hpp"
#include "tiba/random.hpp"

namespace tiba {

std::string_view to_string(NavMode m) {
  switch (m) {
    case NavMode::kTeleop: return "teleop";
    case NavMode::kThermal: return "thermal";
    case NavMode::kLidar: return "lidar";
    case NavMode::kWaypoint: return "waypoint";
  }
  return "thermal";
}

NavMode parse_nav_mode(std::string_view s) {
  for (auto m : {NavMode::kTeleop, NavMode::kThermal, NavMode::kLidar, NavMode::kWaypoint}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown nav mode: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::vector<Vec2> parse_points(const std::string& text) {
  std::vector<Vec2> pts;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    const auto comma = tok.find(',');
    if (comma == std::string::npos) throw ConfigError("point must be x,y: " + tok);
    const auto x = parse_double(std::string_view(tok).substr(0, comma));
    const auto y = parse_double(std::string_view(tok).substr(comma + 1));
    if (!x || !y) throw ConfigError("point is not numeric: " + tok);
    pts.push_back({*x, *y});
  }
  return pts;
}

std::string points_text(const std::vector<Vec2>& pts) {
  std::string out;
  for (const auto& p : pts) {
    if (!out.empty()) out += ' ';
    out += format_double(p.x) + "," + format_double(p.y);
  }
  return out;
}

VssDevice parse_device(const std::string& text) {
  std::vector<std::string> parts;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) parts.push_back(part);
  if (parts.size() != 4) throw ConfigError("vss.device must be name,bus,amps,on|off: " + text);
  VssDevice d;
  d.name = parts[0];
  if (parts[1] == "12") {
    d.bus = PowerBus::k12V;
  } else if (parts[1] == "48") {
    d.bus = PowerBus::k48V;
  } else {
    throw ConfigError("vss.device bus must be 12 or 48: " + text);
  }
  const auto amps = parse_double(parts[2]);
  if (!amps) throw ConfigError("vss.device current is not numeric: " + text);
  d.amps = *amps;
  if (parts[3] != "on" && parts[3] != "off") throw ConfigError("vss.device state must be on or off: " + text);
  d.on_by_default = parts[3] == "on";
  return d;
}

std::string device_text(const VssDevice& d) {
  return d.name + "," + (d.bus == PowerBus::k12V ? "12" : "48") + "," + format_double(d.amps) + "," +
         (d.on_by_default ? "on" : "off");
}

int positive_int(const KvConfig& cfg, std::string_view key, int fallback) {
  const auto v = cfg.get_int(key, fallback);
  if (v <= 0 || v > 1'000'000) throw ConfigError(std::string(key) + " must be a positive step count");
  return static_cast<int>(v);
}

}  // namespace

RunConfig RunConfig::from_config(const KvConfig& cfg) {
  RunConfig c;
  c.scenario = ScenarioSpec::from_config(cfg);

  auto& r = c.robot;
  r.mass = cfg.get_double("robot.mass_kg", r.mass);
  r.wheel_radius = cfg.get_double("robot.wheel_radius_m", r.wheel_radius);
  r.track_width = cfg.get_double("robot.track_width_m", r.track_width);
  r.wheelbase = cfg.get_double("robot.wheelbase_m", r.wheelbase);
  r.gear_ratio = cfg.get_double("robot.gear_ratio", r.gear_ratio);
  r.motor_rated_torque = cfg.get_double("robot.motor_torque_nm", r.motor_rated_torque);
  r.motor_free_speed = cfg.get_double("robot.motor_free_speed_rpm", r.motor_free_speed);
  r.ticks_per_motor_rev = cfg.get_double("robot.ticks_per_motor_rev", r.ticks_per_motor_rev);
  r.body_width = cfg.get_double("robot.body_width_m", r.body_width);
  r.body_length = cfg.get_double("robot.body_length_m", r.body_length);
  // Tires slide more on pavement than in loose soil.
  const double chi_default = c.scenario.ground == GroundKind::kPavement ? 1.5 : r.slip_widening_factor;
  r.slip_widening_factor = cfg.get_double("robot.slip_widening_factor", chi_default);
  r.motor_time_constant = cfg.get_double("robot.motor_time_constant_s", r.motor_time_constant);
  r.validate();

  auto& n = c.nav;
  n.mode = parse_nav_mode(cfg.get_string("nav.mode", std::string(to_string(n.mode))));
  n.gains.k_y = cfg.get_double("nav.k_y", n.gains.k_y);
  n.gains.k_theta = cfg.get_double("nav.k_theta", n.gains.k_theta);
  n.gains.omega_max = cfg.get_double("nav.omega_max", n.gains.omega_max);
  n.v_ref = cfg.get_double("nav.v_ref", n.v_ref);
  n.hold_s = cfg.get_double("nav.hold_s", n.hold_s);
  n.waypoint.lookahead = cfg.get_double("nav.lookahead_m", n.waypoint.lookahead);
  n.waypoint.arrival_radius = cfg.get_double("nav.arrival_radius_m", n.waypoint.arrival_radius);
  n.waypoint.v_ref = n.v_ref;
  n.waypoint.omega_max = n.gains.omega_max;
  n.waypoints = parse_points(cfg.get_string("nav.waypoints", ""));
  n.heading_elevation_max = cfg.get_double("nav.heading_elevation_max_rad", n.heading_elevation_max);
  n.thermal.min_rows = static_cast<int>(cfg.get_int("nav.thermal.min_rows", n.thermal.min_rows));
  n.thermal.max_ground_range = cfg.get_double("nav.thermal.max_range_m", n.thermal.max_ground_range);
  n.lidar.max_fit_range = cfg.get_double("nav.lidar.max_fit_range_m", n.lidar.max_fit_range);
  n.lidar.nominal_row_spacing = cfg.get_double("nav.lidar.nominal_row_spacing_m", c.scenario.row_spacing_m);
  if (!(n.v_ref >= 0.0) || !(n.gains.omega_max > 0.0) || !(n.hold_s >= 0.0)) {
    throw ConfigError("nav.v_ref, nav.omega_max and nav.hold_s must be non-negative (omega_max positive)");
  }

  auto& l = c.lidar;
  l.n_beams = static_cast<int>(cfg.get_int("sensors.lidar.beams", l.n_beams));
  if (l.n_beams < 2) throw ConfigError("sensors.lidar.beams must be at least 2");
  l.angle_max = l.angle_min + (l.n_beams - 1) * (2.0 * std::numbers::pi / l.n_beams);
  l.max_range = cfg.get_double("sensors.lidar.max_range_m", l.max_range);
  l.range_sigma = cfg.get_double("sensors.lidar.sigma_m", l.range_sigma);
  l.canopy_hit_prob = cfg.get_double("sensors.lidar.canopy_hit_prob", l.canopy_hit_prob);

  auto& cam = c.thermal.camera;
  cam.width = static_cast<int>(cfg.get_int("sensors.camera.width", cam.width));
  cam.height = static_cast<int>(cfg.get_int("sensors.camera.height", cam.height));
  cam.hfov = cfg.get_double("sensors.camera.hfov_rad", cam.hfov);
  cam.mount_height = cfg.get_double("sensors.camera.height_m", cam.mount_height);
  cam.pitch = cfg.get_double("sensors.camera.pitch_rad", cam.pitch);
  cam.forward_offset = cfg.get_double("sensors.camera.forward_offset_m", cam.forward_offset);
  if (cam.width < 8 || cam.height < 8) throw ConfigError("camera image must be at least 8x8");
  c.thermal.noise_sigma = cfg.get_double("sensors.thermal.sigma_c", c.thermal.noise_sigma);
  c.thermal.t_ambient = cfg.get_double("sensors.thermal.ambient_c", c.thermal.t_ambient);
  n.thermal.camera = cam;

  c.solar.c = cfg.get_double("sensors.solar.c", c.solar.c);
  c.solar.noise_sigma = cfg.get_double("sensors.solar.noise_v", c.solar.noise_sigma);
  c.ht_sigma_t = cfg.get_double("sensors.ht.sigma_c", c.ht_sigma_t);
  c.ht_sigma_h = cfg.get_double("sensors.ht.sigma_rh", c.ht_sigma_h);

  c.vss.capacity_ah = cfg.get_double("vss.capacity_ah", c.vss.capacity_ah);
  c.vss.enclosure_tau_s = cfg.get_double("vss.enclosure_tau_s", c.vss.enclosure_tau_s);
  if (cfg.contains("vss.device")) {
    c.vss.devices.clear();
    for (const auto& d : cfg.all("vss.device")) c.vss.devices.push_back(parse_device(d));
  }
  if (!(c.vss.capacity_ah > 0.0)) throw ConfigError("vss.capacity_ah must be positive");

  c.teleop.dv = cfg.get_double("teleop.dv", c.teleop.dv);
  c.teleop.domega = cfg.get_double("teleop.domega", c.teleop.domega);
  c.teleop.gain_factor = cfg.get_double("teleop.gain_factor", c.teleop.gain_factor);
  c.teleop.v_max = cfg.get_double("teleop.v_max", r.max_speed());
  c.teleop.omega_max = cfg.get_double("teleop.omega_max", c.teleop.omega_max);

  c.ambient.temperature = cfg.get_double("ambient.temperature_c", c.ambient.temperature);
  c.ambient.humidity = cfg.get_double("ambient.humidity_pct", c.ambient.humidity);

  c.dt = cfg.get_double("run.dt_s", c.dt);
  if (!(c.dt > 0.0 && c.dt <= 0.1)) throw ConfigError("run.dt_s must be in (0, 0.1]");
  c.duration_s = cfg.get_double("run.duration_s", c.duration_s);
  if (!(c.duration_s > 0.0)) throw ConfigError("run.duration_s must be positive");
  c.start.x = cfg.get_double("run.start_x_m", c.start.x);
  c.start.y = cfg.get_double("run.start_y_m", c.start.y);
  c.start.theta = cfg.get_double("run.start_theta_rad", c.start.theta);
  c.start_jitter_m = cfg.get_double("run.start_jitter_m", c.start_jitter_m);
  c.start_jitter_rad = cfg.get_double("run.start_jitter_rad", c.start_jitter_rad);
  c.exit_margin_m = cfg.get_double("run.exit_margin_m", c.exit_margin_m);
  c.heartbeat_timeout_s = cfg.get_double("run.heartbeat_timeout_s", c.heartbeat_timeout_s);

  c.control_every = positive_int(cfg, "rate.control_every", c.control_every);
  c.lidar_every = positive_int(cfg, "rate.lidar_every", c.lidar_every);
  c.thermal_every = positive_int(cfg, "rate.thermal_every", c.thermal_every);
  c.solar_every = positive_int(cfg, "rate.solar_every", c.solar_every);
  c.ht_every = positive_int(cfg, "rate.ht_every", c.ht_every);
  c.vss_log_every = positive_int(cfg, "rate.vss_log_every", c.vss_log_every);
  c.telemetry_every = positive_int(cfg, "rate.telemetry_every", c.telemetry_every);
  c.log_lidar_every = positive_int(cfg, "rate.log_lidar_every", c.log_lidar_every);
  c.log_thermal_every = positive_int(cfg, "rate.log_thermal_every", c.log_thermal_every);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_config(KvConfig::load(path)); }

KvConfig RunConfig::to_config() const {
  KvConfig cfg;
  scenario.write_config(cfg);

  cfg.set("robot.mass_kg", robot.mass);
  cfg.set("robot.wheel_radius_m", robot.wheel_radius);
  cfg.set("robot.track_width_m", robot.track_width);
  cfg.set("robot.wheelbase_m", robot.wheelbase);
  cfg.set("robot.gear_ratio", robot.gear_ratio);
  cfg.set("robot.motor_torque_nm", robot.motor_rated_torque);
  cfg.set("robot.motor_free_speed_rpm", robot.motor_free_speed);
  cfg.set("robot.ticks_per_motor_rev", robot.ticks_per_motor_rev);
  cfg.set("robot.body_width_m", robot.body_width);
  cfg.set("robot.body_length_m", robot.body_length);
  cfg.set("robot.slip_widening_factor", robot.slip_widening_factor);
  cfg.set("robot.motor_time_constant_s", robot.motor_time_constant);

  cfg.set("nav.mode", std::string(to_string(nav.mode)));
  cfg.set("nav.k_y", nav.gains.k_y);
  cfg.set("nav.k_theta", nav.gains.k_theta);
  cfg.set("nav.omega_max", nav.gains.omega_max);
  cfg.set("nav.v_ref", nav.v_ref);
  cfg.set("nav.hold_s", nav.hold_s);
  cfg.set("nav.lookahead_m", nav.waypoint.lookahead);
  cfg.set("nav.arrival_radius_m", nav.waypoint.arrival_radius);
  if (!nav.waypoints.empty()) cfg.set("nav.waypoints", points_text(nav.waypoints));
  cfg.set("nav.heading_elevation_max_rad", nav.heading_elevation_max);
  cfg.set("nav.thermal.min_rows", std::to_string(nav.thermal.min_rows));
  cfg.set("nav.thermal.max_range_m", nav.thermal.max_ground_range);
  cfg.set("nav.lidar.max_fit_range_m", nav.lidar.max_fit_range);
  cfg.set("nav.lidar.nominal_row_spacing_m", nav.lidar.nominal_row_spacing);

  cfg.set("sensors.lidar.beams", std::to_string(lidar.n_beams));
  cfg.set("sensors.lidar.max_range_m", lidar.max_range);
  cfg.set("sensors.lidar.sigma_m", lidar.range_sigma);
  cfg.set("sensors.lidar.canopy_hit_prob", lidar.canopy_hit_prob);
  const auto& cam = thermal.camera;
  cfg.set("sensors.camera.width", std::to_string(cam.width));
  cfg.set("sensors.camera.height", std::to_string(cam.height));
  cfg.set("sensors.camera.hfov_rad", cam.hfov);
  cfg.set("sensors.camera.height_m", cam.mount_height);
  cfg.set("sensors.camera.pitch_rad", cam.pitch);
  cfg.set("sensors.camera.forward_offset_m", cam.forward_offset);
  cfg.set("sensors.thermal.sigma_c", thermal.noise_sigma);
  cfg.set("sensors.thermal.ambient_c", thermal.t_ambient);
  cfg.set("sensors.solar.c", solar.c);
  cfg.set("sensors.solar.noise_v", solar.noise_sigma);
  cfg.set("sensors.ht.sigma_c", ht_sigma_t);
  cfg.set("sensors.ht.sigma_rh", ht_sigma_h);

  cfg.set("vss.capacity_ah", vss.capacity_ah);
  cfg.set("vss.enclosure_tau_s", vss.enclosure_tau_s);
  for (const auto& d : vss.devices) cfg.add("vss.device", device_text(d));

  cfg.set("teleop.dv", teleop.dv);
  cfg.set("teleop.domega", teleop.domega);
  cfg.set("teleop.gain_factor", teleop.gain_factor);
  cfg.set("teleop.v_max", teleop.v_max);
  cfg.set("teleop.omega_max", teleop.omega_max);

  cfg.set("ambient.temperature_c", ambient.temperature);
  cfg.set("ambient.humidity_pct", ambient.humidity);

  cfg.set("run.dt_s", dt);
  cfg.set("run.duration_s", duration_s);
  cfg.set("run.start_x_m", start.x);
  cfg.set("run.start_y_m", start.y);
  cfg.set("run.start_theta_rad", start.theta);
  cfg.set("run.start_jitter_m", start_jitter_m);
  cfg.set("run.start_jitter_rad", start_jitter_rad);
  cfg.set("run.exit_margin_m", exit_margin_m);
  cfg.set("run.heartbeat_timeout_s", heartbeat_timeout_s);

  cfg.set("rate.control_every", std::to_string(control_every));
  cfg.set("rate.lidar_every", std::to_string(lidar_every));
  cfg.set("rate.thermal_every", std::to_string(thermal_every));
  cfg.set("rate.solar_every", std::to_string(solar_every));
  cfg.set("rate.ht_every", std::to_string(ht_every));
  cfg.set("rate.vss_log_every", std::to_string(vss_log_every));
  cfg.set("rate.telemetry_every", std::to_string(telemetry_every));
  cfg.set("rate.log_lidar_every", std::to_string(log_lidar_every));
  cfg.set("rate.log_thermal_every", std::to_string(log_thermal_every));
  return cfg;
}

// ---------------------------------------------------------------------------
// Metrics

std::string format_metrics(const RunMetrics& m) {
  std::ostringstream out;
  out << "cross_track_rms_m=" << format_double(m.cross_track_rms) << '\n'
      << "cross_track_max_m=" << format_double(m.cross_track_max) << '\n'
      << "stem_collisions=" << m.stem_collisions << '\n'
      << "distance_traveled_m=" << format_double(m.distance_traveled) << '\n'
      << "completion=" << (m.completion ? "true" : "false") << '\n'
      << "energy_used_wh=" << format_double(m.energy_used_wh) << '\n';
  return out.str();
}

std::vector<const Stem*> body_contacts(const TunnelScenario& scene, const RobotParams& robot, const Pose2D& pose) {
  const double hl = robot.body_length / 2.0;
  const double hw = robot.body_width / 2.0;
  const double reach = std::hypot(hl, hw) + scene.max_stem_radius();
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);

  std::vector<const Stem*> hits;
  for (const auto* row : {&scene.stems_left, &scene.stems_right}) {
    auto it = std::lower_bound(row->begin(), row->end(), pose.x - reach,
                               [](const Stem& st, double x) { return st.center.x < x; });
    for (; it != row->end() && it->center.x <= pose.x + reach; ++it) {
      const double dx = it->center.x - pose.x;
      const double dy = it->center.y - pose.y;
      const double lx = c * dx + s * dy;
      const double ly = -s * dx + c * dy;
      const double qx = lx - std::clamp(lx, -hl, hl);
      const double qy = ly - std::clamp(ly, -hw, hw);
      if (qx * qx + qy * qy <= it->radius * it->radius) hits.push_back(&*it);
    }
  }
  return hits;
}

RunMetrics compute_metrics(const RunLog& log) {
  if (log.empty()) throw ConfigError("log has no records");
  const RunConfig cfg = RunConfig::from_config(log.header().config);
  const TunnelScenario scene = generate_tunnel(log.header().seed, cfg.scenario);

  RunMetrics m;
  double sum_sq = 0.0;
  std::size_t n = 0;
  std::optional<Pose2D> prev;
  std::set<const Stem*> touching;
  for (const auto& rec : log.records()) {
    if (const auto* p = rec.as<PoseRec>()) {
      const Pose2D& q = p->truth;
      sum_sq += q.y * q.y;
      m.cross_track_max = std::max(m.cross_track_max, std::abs(q.y));
      ++n;
      if (prev) m.distance_traveled += std::hypot(q.x - prev->x, q.y - prev->y);
      prev = q;
      std::set<const Stem*> now;
      for (const Stem* st : body_contacts(scene, cfg.robot, q)) {
        now.insert(st);
        if (!touching.contains(st)) ++m.stem_collisions;
      }
      touching = std::move(now);
    } else if (const auto* e = rec.as<EventRec>()) {
      if (e->name == events::kGoalReached) m.completion = true;
    } else if (const auto* v = rec.as<VssState>()) {
      m.energy_used_wh = v->energy_used_wh;
    }
  }
  if (n > 0) m.cross_track_rms = std::sqrt(sum_sq / static_cast<double>(n));
  return m;
}

// ---------------------------------------------------------------------------
// Drive core

DriveCore::DriveCore(const RunConfig& cfg, const TunnelScenario& scene, const Pose2D& start,
                     const OdometryEstimate& odom)
    : cfg_(cfg),
      scene_(scene),
      pose_(start),
      odom_(odom),
      vss_(initial_vss_state(cfg.vss, cfg.ambient)),
      frame_(encode_wheel_command({})) {}

void DriveCore::apply_setpoint(const Twist& setpoint) {
  setpoint_ = setpoint;
  frame_ = encode_wheel_command(twist_to_wheel_speeds(setpoint, cfg_.robot));
  motor_cmd_ = decode_wheel_command(frame_);
}

DriveCore::StepOutput DriveCore::step(std::span<const RelayCommand> relays, double t_next,
                                      std::uint64_t step_next) {
  const RobotParams& rp = cfg_.robot;
  bool drive_on = vss_.relay(kDriveRelay);
  for (const auto& r : relays) {
    if (r.name == kDriveRelay) drive_on = r.on;
  }
  const WheelSpeeds cmd = (drive_on && !vss_.exhausted) ? motor_cmd_ : WheelSpeeds{};

  const double c = std::cos(pose_.theta);
  const double s = std::sin(pose_.theta);
  const double half = rp.track_width / 2.0;
  const SurfaceParams left = surface_at(scene_, {pose_.x - s * half, pose_.y + c * half});
  const SurfaceParams right = surface_at(scene_, {pose_.x + s * half, pose_.y - c * half});

  const MotorStepResult m = step_motors(drive_, cmd, left, right, rp, cfg_.dt);
  drive_ = m.state;
  actual_ = wheel_speeds_to_twist(m.mean_speeds, rp);
  pose_ = integrate_pose(pose_, actual_, cfg_.dt);
  odom_ = odometry_update(odom_, m.ticks_left, m.ticks_right, rp, cfg_.dt);

  const double mech = std::max(0.0, m.torque_left * m.mean_speeds.left) +
                      std::max(0.0, m.torque_right * m.mean_speeds.right);
  VssStepResult v = vss_step(vss_, relays, {mech}, cfg_.vss, cfg_.ambient, cfg_.dt, t_next, step_next);
  vss_ = std::move(v.state);

  return {PoseRec{pose_, odom_}, WheelRec{cmd, m.mean_speeds, drive_.left.hall_ticks, drive_.right.hall_ticks},
          std::move(v.telemetry)};
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

constexpr std::string_view kNavSource = "nav";
constexpr double kPathSpacing = 0.1;  // m between pure-pursuit target points

bool due(std::uint64_t step, int every) { return step % static_cast<std::uint64_t>(every) == 0; }

}  // namespace

Simulation::Simulation(RunConfig cfg) {
  // Build from the serialized form so a replay that parses the header sees
  // bit-identical parameters.
  const KvConfig text = cfg.to_config();
  cfg_ = RunConfig::from_config(text);
  scene_ = generate_tunnel(cfg_.seed(), cfg_.scenario);
  log_ = RunLog(LogHeader{std::string(kRunLogFormat), cfg_.seed(), text});
  mode_ = cfg_.nav.mode;
  teleop_ = TeleopMapper(cfg_.teleop);

  Pose2D truth = cfg_.start;
  {
    Rng rng = substream(cfg_.seed(), Stream::kStart);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    truth.y += cfg_.start_jitter_m * unit(rng);
    truth.theta = normalize_angle(truth.theta + cfg_.start_jitter_rad * unit(rng));
  }

  // Initial heading comes from the sun sensor; position is the nominal start.
  OdometryEstimate odom;
  odom.pose = {cfg_.start.x, cfg_.start.y, cfg_.start.theta};
  Rng solar_rng = substream(cfg_.seed(), Stream::kSolar, 0);
  const SolarReading reading = solar_sample(scene_.sun, truth.theta, cfg_.solar, solar_rng);
  emit(reading);
  try {
    const double yaw = sun_heading(solar_estimate(reading, cfg_.solar), scene_.sun, cfg_.nav.heading_elevation_max);
    odom.pose.theta = yaw;
    emit_event(events::kHeadingFix, "yaw=" + format_double(yaw));
  } catch (const Error& e) {
    emit_event(events::kHeadingFix, std::string("unavailable, using configured heading: ") + e.what());
  }

  core_ = std::make_unique<DriveCore>(cfg_, scene_, truth, odom);
  emit(PoseRec{truth, odom});
  emit(core_->vss());

  const std::vector<Vec2> corners = cfg_.nav.waypoints.empty()
                                        ? std::vector<Vec2>{{odom.pose.x, odom.pose.y}, {cfg_.goal_x(), 0.0}}
                                        : cfg_.nav.waypoints;
  path_ = densify_path(corners, kPathSpacing);
}

void Simulation::emit(RecordPayload payload) { log_.record(RunRecord{time(), step_, std::move(payload)}); }

void Simulation::emit_event(std::string_view name, std::string detail) {
  EventRec e{std::string(name), std::move(detail)};
  pending_events_.push_back(e);
  emit(std::move(e));
}

void Simulation::submit_teleop(const TeleopInput& input) {
  std::lock_guard lock(inbox_mutex_);
  inbox_.teleop.push_back(input);
}

void Simulation::submit_relay(std::string name, bool on) {
  if (name != kDriveRelay && cfg_.vss.device(name) == nullptr) throw ConfigError("unknown relay: " + name);
  std::lock_guard lock(inbox_mutex_);
  inbox_.relays.push_back({std::move(name), on});
}

void Simulation::submit_mode(NavMode mode) {
  std::lock_guard lock(inbox_mutex_);
  inbox_.mode = mode;
}

void Simulation::submit_disconnect() {
  std::lock_guard lock(inbox_mutex_);
  inbox_.disconnect = true;
}

void Simulation::sense() {
  const Pose2D& pose = core_->pose();
  const std::uint64_t seed = cfg_.seed();
  const double t = time();

  if (due(step_, cfg_.lidar_every)) {
    LidarScan scan = lidar_scan(pose, scene_, cfg_.lidar, seed, step_ / cfg_.lidar_every);
    if (mode_ == NavMode::kLidar) {
      try {
        estimate_ = lidar_corridor(scan, cfg_.nav.lidar);
        estimate_t_ = t;
      } catch (const NoCorridor&) {
        estimate_.reset();
      }
    }
    if (due(step_, cfg_.log_lidar_every)) emit(scan);
    last_scan_ = std::move(scan);
  }

  if (due(step_, cfg_.thermal_every)) {
    const ThermalImage img =
        thermal_render(pose, scene_, scene_.sun, cfg_.thermal, seed, step_ / cfg_.thermal_every);
    if (mode_ == NavMode::kThermal) {
      try {
        estimate_ = thermal_centerline(img, cfg_.nav.thermal);
        estimate_t_ = t;
      } catch (const NoPath&) {
        estimate_.reset();
      }
    }
    ThermalRec rec = ThermalRec::from_image(img);
    if (due(step_, cfg_.log_thermal_every)) emit(rec);
    last_thermal_ = std::move(rec);
  }

  if (step_ > 0 && due(step_, cfg_.solar_every)) {
    Rng rng = substream(seed, Stream::kSolar, step_ / cfg_.solar_every);
    emit(solar_sample(scene_.sun, pose.theta, cfg_.solar, rng));
  }
  if (due(step_, cfg_.ht_every)) {
    Rng rng = substream(seed, Stream::kHt, step_ / cfg_.ht_every);
    const VssState& v = core_->vss();
    emit(ht_sample({v.internal_temp, v.internal_humidity}, cfg_.ht_sigma_t, cfg_.ht_sigma_h, rng));
  }
}

Twist Simulation::control() {
  const double t = time();
  switch (mode_) {
    case NavMode::kTeleop: {
      TeleopInput in = teleop_input_;
      if (t - teleop_last_t_ > cfg_.heartbeat_timeout_s) in.deadman = false;
      teleop_input_.gain_step = GainStep::kNone;
      return teleop_.map(in, core_->setpoint());
    }
    case NavMode::kWaypoint: {
      const auto cmd = waypoint_steer(core_->odometry().pose, path_, cfg_.nav.waypoint, &path_progress_);
      if (!cmd) {
        finish(events::kGoalReached);
        return {};
      }
      return *cmd;
    }
    case NavMode::kThermal:
    case NavMode::kLidar: {
      if (estimate_) {
        lost_reported_ = false;
        return corridor_steer(*estimate_, cfg_.nav.gains, cfg_.nav.v_ref);
      }
      if (t - estimate_t_ <= cfg_.nav.hold_s) return core_->setpoint();
      if (!lost_reported_) {
        emit_event(events::kNavLost, std::string(to_string(mode_)) + " corridor not found");
        lost_reported_ = true;
      }
      return {};
    }
  }
  return {};
}

void Simulation::finish(std::string_view reason) {
  if (finished_) return;
  finished_ = true;
  emit_event(reason, "t=" + format_double(time()));
}

void Simulation::step() {
  if (finished_) return;
  const double t = time();

  Pending in;
  {
    std::lock_guard lock(inbox_mutex_);
    std::swap(in, inbox_);
  }
  if (in.mode && *in.mode != mode_) {
    mode_ = *in.mode;
    estimate_.reset();
    estimate_t_ = -1e9;
    lost_reported_ = false;
    emit_event(events::kModeChange, std::string(to_string(mode_)));
  }
  for (const auto& r : in.relays) {
    emit(CommandRec{std::string(topics::kVss), {}, r.name, r.on});
  }
  bool zero_now = false;
  if (in.disconnect) {
    teleop_input_ = {};
    teleop_last_t_ = -1e9;
    zero_now = mode_ == NavMode::kTeleop;
  }
  if (!in.teleop.empty()) {
    for (const auto& ti : in.teleop) {
      if (ti.gain_step != GainStep::kNone) teleop_input_.gain_step = ti.gain_step;
    }
    const GainStep pending_gain = teleop_input_.gain_step;
    teleop_input_ = in.teleop.back();
    teleop_input_.gain_step = pending_gain;
    teleop_last_t_ = t;
    if (!teleop_input_.deadman && mode_ == NavMode::kTeleop) zero_now = true;
  }

  sense();

  if (due(step_, cfg_.control_every) || zero_now) {
    const Twist sp = control();
    if (finished_) return;
    core_->apply_setpoint(sp);
    const auto source = mode_ == NavMode::kTeleop ? topics::kTeleopBox : kNavSource;
    emit(CommandRec{std::string(source), sp, {}, false});
  }

  const bool log_wheel = due(step_, cfg_.control_every);
  DriveCore::StepOutput out;
  try {
    out = core_->step(in.relays, static_cast<double>(step_ + 1) * cfg_.dt, step_ + 1);
  } catch (const OutOfBounds&) {
    finish(events::kOutOfBounds);
    return;
  }
  ++step_;
  emit(out.pose);
  if (log_wheel) emit(out.wheel);

  const bool exhausted_now = out.vss.as<EventRec>() != nullptr;
  if (exhausted_now) {
    pending_events_.push_back(*out.vss.as<EventRec>());
    log_.record(out.vss);
  } else if (due(step_, cfg_.vss_log_every)) {
    log_.record(out.vss);
  }

  if ((mode_ == NavMode::kThermal || mode_ == NavMode::kLidar) && out.pose.truth.x >= cfg_.goal_x()) {
    finish(events::kGoalReached);
  } else if (exhausted_now) {
    finished_ = true;
  } else if (time() >= cfg_.duration_s - 1e-9) {
    finish("timeout");
  }
  if (finished_ && !exhausted_now && !due(step_, cfg_.vss_log_every)) log_.record(out.vss);

  if (sink_ && (due(step_, cfg_.telemetry_every) || finished_ || !pending_events_.empty())) publish_telemetry();
}

void Simulation::publish_telemetry() {
  auto snap = std::make_shared<TelemetrySnapshot>();
  snap->t = time();
  snap->pose = core_->pose();
  snap->actual = core_->actual_twist();
  snap->setpoint = core_->setpoint();
  snap->mode = mode_;
  snap->scan = last_scan_;
  snap->thermal = last_thermal_;
  snap->vss = core_->vss();
  snap->events = std::move(pending_events_);
  pending_events_.clear();
  sink_(std::move(snap));
}

void Simulation::run_to_end() {
  while (!finished_) step();
}

RunResult run_scenario(const RunConfig& cfg, const std::optional<std::filesystem::path>& log_path) {
  Simulation sim(cfg);
  sim.run_to_end();
  if (log_path) sim.log().save(*log_path);
  return {sim.log(), compute_metrics(sim.log())};
}

// ---------------------------------------------------------------------------
// Replay

ReplayResult replay(const RunLog& original) {
  const RunConfig cfg = RunConfig::from_config(original.header().config);
  const TunnelScenario scene = generate_tunnel(original.header().seed, cfg.scenario);
  const auto& recs = original.records();

  const auto first_pose = std::find_if(recs.begin(), recs.end(), [](const RunRecord& r) { return r.as<PoseRec>(); });
  if (first_pose == recs.end()) throw CorruptLog("log has no pose record");
  const PoseRec& p0 = *first_pose->as<PoseRec>();
  DriveCore core(cfg, scene, p0.truth, p0.odom);

  const std::uint64_t last_step = recs.empty() ? 0 : recs.back().step;
  std::map<std::uint64_t, DriveCore::StepOutput> regen;
  std::size_t i = 0;
  for (std::uint64_t n = first_pose->step; n < last_step; ++n) {
    std::vector<RelayCommand> relays;
    for (; i < recs.size() && recs[i].step <= n; ++i) {
      const auto* c = recs[i].as<CommandRec>();
      if (c == nullptr || recs[i].step != n) continue;
      if (c->is_relay()) {
        relays.push_back({c->relay, c->relay_on});
      } else {
        core.apply_setpoint(c->setpoint);
      }
    }
    try {
      regen.emplace(n + 1, core.step(relays, static_cast<double>(n + 1) * cfg.dt, n + 1));
    } catch (const OutOfBounds&) {
      break;
    }
  }

  ReplayResult res;
  res.log = RunLog(original.header());
  res.identical = true;
  for (const auto& rec : recs) {
    RunRecord out = rec;
    const auto it = rec.step > first_pose->step ? regen.find(rec.step) : regen.end();
    const auto* ev = rec.as<EventRec>();
    const bool physical = rec.as<PoseRec>() || rec.as<WheelRec>() || rec.as<VssState>() ||
                          (ev && ev->name == events::kPowerExhausted);
    if (physical && rec.step > first_pose->step) {
      if (it == regen.end()) {
        res.identical = false;
        if (!res.first_mismatch_step) res.first_mismatch_step = rec.step;
        res.log.record(out);
        continue;
      }
      if (rec.as<PoseRec>()) {
        out.payload = it->second.pose;
      } else if (rec.as<WheelRec>()) {
        out.payload = it->second.wheel;
      } else {
        out.payload = it->second.vss.payload;
      }
      if (!(out == rec)) {
        res.identical = false;
        if (!res.first_mismatch_step) res.first_mismatch_step = rec.step;
      }
    }
    res.log.record(std::move(out));
  }
  return res;
}

}  // namespace tiba
