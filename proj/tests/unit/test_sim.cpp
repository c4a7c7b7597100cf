#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tiba/error.hpp"
#include "tiba/sim.hpp"

using namespace tiba;

namespace {

RunConfig short_run(NavMode mode, HeightClass h = HeightClass::kH1, std::uint64_t seed = 3) {
  RunConfig cfg;
  cfg.scenario.seed = seed;
  cfg.scenario.length_m = 18.0;
  cfg.scenario.height_class = h;
  cfg.nav.mode = mode;
  cfg.duration_s = 40.0;
  return cfg;
}

int count_events(const RunLog& log, std::string_view name) {
  return static_cast<int>(std::count_if(log.records().begin(), log.records().end(), [&](const RunRecord& r) {
    const auto* e = r.as<EventRec>();
    return e && e->name == name;
  }));
}

std::string text_of(const RunLog& log) {
  std::ostringstream os;
  log.write(os);
  return os.str();
}

void step_n(Simulation& sim, int n) {
  for (int i = 0; i < n && !sim.finished(); ++i) sim.step();
}

}  // namespace

TEST_CASE("run configuration survives the flat format exactly") {
  RunConfig cfg = short_run(NavMode::kLidar, HeightClass::kH2, 99);
  cfg.scenario.crevices.push_back({{1.0, -0.5}, {1.3, -0.5}, {1.3, 0.5}});
  cfg.nav.waypoints = {{1.0, 0.1}, {5.0, -0.2}};
  cfg.vss.devices.push_back({"pump", PowerBus::k48V, 2.5, false});
  cfg.start_jitter_rad = deg2rad(3.0);
  const auto kv = cfg.to_config();
  const auto back = RunConfig::from_config(kv);
  CHECK(back.to_config().to_text() == kv.to_text());
  CHECK(back.scenario == cfg.scenario);
  CHECK(back.nav.mode == NavMode::kLidar);
  CHECK(back.vss.device("pump") != nullptr);
  CHECK(back.start_jitter_rad == cfg.start_jitter_rad);
}

TEST_CASE("navigation mode names") {
  for (auto m : {NavMode::kTeleop, NavMode::kThermal, NavMode::kLidar, NavMode::kWaypoint}) {
    CHECK(parse_nav_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_nav_mode("autopilot"), ConfigError);
  KvConfig kv;
  kv.set("nav.mode", "autopilot");
  CHECK_THROWS_AS(RunConfig::from_config(kv), ConfigError);
}

TEST_CASE("thermal run through a short tunnel") {
  const auto res = run_scenario(short_run(NavMode::kThermal));
  CHECK(res.metrics.completion);
  CHECK(res.metrics.stem_collisions == 0);
  CHECK(res.metrics.cross_track_max < 0.3);
  CHECK(res.metrics.distance_traveled > 14.0);
  CHECK(res.metrics.energy_used_wh > 0.0);
  CHECK(count_events(res.log, events::kGoalReached) == 1);
  CHECK(count_events(res.log, events::kHeadingFix) == 1);
}

TEST_CASE("lidar run through a short tunnel") {
  const auto res = run_scenario(short_run(NavMode::kLidar, HeightClass::kH2));
  CHECK(res.metrics.completion);
  CHECK(res.metrics.stem_collisions == 0);
  CHECK(res.metrics.cross_track_max < 0.3);
}

TEST_CASE("waypoint run arrives at the end of the path") {
  auto cfg = short_run(NavMode::kWaypoint);
  cfg.nav.waypoints = {{0.5, 0.0}, {8.0, 0.0}, {14.0, 0.0}};
  const auto res = run_scenario(cfg);
  CHECK(res.metrics.completion);
  CHECK(res.metrics.cross_track_max < 0.1);
}

TEST_CASE("runs are deterministic and replay bit for bit") {
  const auto cfg = short_run(NavMode::kThermal, HeightClass::kH1, 17);
  const auto a = run_scenario(cfg);
  const auto b = run_scenario(cfg);
  CHECK(text_of(a.log) == text_of(b.log));
  CHECK(a.metrics == b.metrics);

  const auto r = replay(a.log);
  CHECK(r.identical);
  CHECK_FALSE(r.first_mismatch_step.has_value());
  CHECK(text_of(r.log) == text_of(a.log));
  CHECK(compute_metrics(r.log) == a.metrics);
}

TEST_CASE("different seeds give different runs") {
  const auto a = run_scenario(short_run(NavMode::kThermal, HeightClass::kH1, 1));
  const auto b = run_scenario(short_run(NavMode::kThermal, HeightClass::kH1, 2));
  CHECK(text_of(a.log) != text_of(b.log));
}

TEST_CASE("replay notices an altered command") {
  const auto original = run_scenario(short_run(NavMode::kThermal)).log;
  RunLog tampered(original.header());
  bool changed = false;
  for (auto rec : original.records()) {
    if (auto* c = std::get_if<CommandRec>(&rec.payload); c && !changed && rec.step >= 200 && !c->is_relay()) {
      c->setpoint.omega += 0.05;
      changed = true;
    }
    tampered.record(rec);
  }
  REQUIRE(changed);
  const auto r = replay(tampered);
  CHECK_FALSE(r.identical);
  REQUIRE(r.first_mismatch_step.has_value());
  CHECK(*r.first_mismatch_step >= 200);
}

TEST_CASE("metrics need a log with content") {
  CHECK_THROWS_AS(compute_metrics(RunLog{}), ConfigError);
}

TEST_CASE("body contacts see a stem inside the footprint") {
  TunnelScenario sc;
  sc.stems_left.push_back({{1.0, 0.3}, 0.02});
  sc.stems_right.push_back({{1.0, -0.6}, 0.02});
  const RobotParams robot;
  CHECK(body_contacts(sc, robot, {1.0, 0.0, 0.0}).size() == 1);
  CHECK(body_contacts(sc, robot, {1.0, 0.0, 0.0}).front()->center.y == 0.3);
  CHECK(body_contacts(sc, robot, {5.0, 0.0, 0.0}).empty());
  // Turned sideways the body is narrow along y but long, so it reaches both.
  CHECK(body_contacts(sc, robot, {1.0, -0.1, std::numbers::pi / 2}).size() == 2);
}

TEST_CASE("a short time limit ends the run without completion") {
  auto cfg = short_run(NavMode::kThermal);
  cfg.duration_s = 2.0;
  const auto res = run_scenario(cfg);
  CHECK_FALSE(res.metrics.completion);
  CHECK(count_events(res.log, "timeout") == 1);
  CHECK(res.log.records().back().t == doctest::Approx(2.0));
}

TEST_CASE("teleop: no input means no motion, deadman input drives") {
  Simulation sim(short_run(NavMode::kTeleop));
  const double x0 = sim.pose().x;
  step_n(sim, 100);
  CHECK(sim.pose().x == doctest::Approx(x0).epsilon(1e-12));

  for (int i = 0; i < 100; ++i) {
    sim.submit_teleop({1.0, 0.0, true});
    sim.step();
  }
  CHECK(sim.setpoint().v > 0.2);
  CHECK(sim.pose().x > x0 + 0.05);
}

TEST_CASE("teleop: releasing the deadman or disconnecting stops at once") {
  Simulation sim(short_run(NavMode::kTeleop));
  for (int i = 0; i < 50; ++i) {
    sim.submit_teleop({1.0, 0.0, true});
    sim.step();
  }
  REQUIRE(sim.setpoint().v > 0.0);
  sim.submit_teleop({1.0, 0.0, false});
  sim.step();
  CHECK(sim.setpoint() == Twist{});

  for (int i = 0; i < 50; ++i) {
    sim.submit_teleop({1.0, 0.0, true});
    sim.step();
  }
  REQUIRE(sim.setpoint().v > 0.0);
  sim.submit_disconnect();
  sim.step();
  CHECK(sim.setpoint() == Twist{});
}

TEST_CASE("teleop: a stale heartbeat releases the deadman") {
  Simulation sim(short_run(NavMode::kTeleop));
  for (int i = 0; i < 20; ++i) {
    sim.submit_teleop({1.0, 0.0, true});
    sim.step();
  }
  REQUIRE(sim.setpoint().v > 0.0);
  step_n(sim, 30);  // 0.3 s of silence
  CHECK(sim.setpoint() == Twist{});
}

TEST_CASE("mode switches are logged and take effect") {
  Simulation sim(short_run(NavMode::kTeleop));
  step_n(sim, 10);
  sim.submit_mode(NavMode::kThermal);
  step_n(sim, 300);
  CHECK(sim.mode() == NavMode::kThermal);
  CHECK(count_events(sim.log(), events::kModeChange) == 1);
  CHECK(sim.pose().x > 1.0);
}

TEST_CASE("relays change the bus current by the device draw") {
  Simulation sim(short_run(NavMode::kThermal));
  step_n(sim, 20);
  const double before = sim.vss().bus12_current;
  sim.submit_relay("lights", true);
  sim.step();
  CHECK(sim.vss().bus12_current - before == doctest::Approx(1.5).epsilon(1e-9));
  CHECK_THROWS_AS(sim.submit_relay("warp_drive", true), ConfigError);
}

TEST_CASE("switching the drive relay off stops the robot") {
  Simulation sim(short_run(NavMode::kThermal));
  step_n(sim, 200);
  REQUIRE(sim.pose().x > 1.0);
  sim.submit_relay("drive", false);
  step_n(sim, 300);
  const double x = sim.pose().x;
  step_n(sim, 100);
  // The motors spin down exponentially, so only a residual creep remains.
  CHECK(std::abs(sim.pose().x - x) < 1e-6);
  CHECK(sim.vss().bus48_current == 0.0);
}

TEST_CASE("battery exhaustion ends the run with one event") {
  auto cfg = short_run(NavMode::kThermal);
  cfg.vss.capacity_ah = 0.001;  // 48 mWh: a few seconds
  const auto res = run_scenario(cfg);
  CHECK_FALSE(res.metrics.completion);
  CHECK(count_events(res.log, events::kPowerExhausted) == 1);
  CHECK(replay(res.log).identical);
}

TEST_CASE("telemetry snapshots arrive at the telemetry rate") {
  Simulation sim(short_run(NavMode::kLidar));
  int snaps = 0;
  bool saw_scan = false;
  sim.set_telemetry_sink([&](std::shared_ptr<const TelemetrySnapshot> s) {
    ++snaps;
    saw_scan = saw_scan || s->scan.has_value();
  });
  step_n(sim, 100);
  CHECK(snaps >= 10);
  CHECK(snaps <= 12);
  CHECK(saw_scan);
}
