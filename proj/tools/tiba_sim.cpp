#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <iostream>
#include <optional>
#include <thread>

#include "tiba/drivetrain.hpp"
#include "tiba/error.hpp"
#include "tiba/service.hpp"
#include "tiba/sim.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

int cmd_size(double mass, double mu, double radius, double ratio, double torque, double rpm, double g, bool kv) {
  tiba::RobotParams p;
  p.mass = mass;
  p.wheel_radius = radius;
  p.gear_ratio = ratio;
  p.motor_rated_torque = torque;
  p.motor_free_speed = rpm;
  const tiba::SurfaceParams surface{tiba::SurfaceKind::kSand, mu, 0.0};
  const auto report = tiba::sizing_report(p, surface, g);
  std::cout << (kv ? tiba::format_key_values(report) : tiba::format_table(report));
  return report.feasible ? 0 : 1;
}

struct RunArgs {
  std::string scenario;
  std::string nav;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string log_path = "run.ndjson";
  bool no_log = false;
  bool serve = false;
  double speed = 1.0;
};

int cmd_run(const RunArgs& a) {
  tiba::KvConfig kv = a.scenario.empty() ? tiba::KvConfig{} : tiba::KvConfig::load(a.scenario);
  if (!a.nav.empty()) kv.set("nav.mode", a.nav);
  if (a.seed) kv.set("seed", std::to_string(*a.seed));
  if (a.duration) kv.set("run.duration_s", *a.duration);
  const auto cfg = tiba::RunConfig::from_config(kv);

  tiba::Simulation sim(cfg);
  if (a.serve) {
    const auto port = tiba::service::port_from_env();
    tiba::service::TelemetryServer server("0.0.0.0", port, tiba::service::simulation_handler(sim),
                                          [&sim] { sim.submit_disconnect(); });
    std::cerr << "serving telemetry on ws://0.0.0.0:" << server.port() << "\n";
    tiba::service::serve_run(sim, server, a.speed, &g_stop);
  } else {
    while (!sim.finished() && !g_stop) sim.step();
  }

  if (!a.no_log) sim.log().save(a.log_path);
  const auto m = tiba::compute_metrics(sim.log());
  std::cout << tiba::format_metrics(m);
  return (m.completion && m.stem_collisions == 0) ? 0 : 1;
}

int cmd_replay(const std::string& path, const std::string& out) {
  const auto original = tiba::RunLog::load(path);
  const auto res = tiba::replay(original);
  if (!out.empty()) res.log.save(out);
  const auto& last = original.records();
  std::optional<tiba::Pose2D> final_pose;
  for (auto it = last.rbegin(); it != last.rend(); ++it) {
    if (const auto* p = it->as<tiba::PoseRec>()) {
      final_pose = p->truth;
      break;
    }
  }
  std::cout << "identical=" << (res.identical ? "true" : "false") << '\n';
  if (res.first_mismatch_step) std::cout << "first_mismatch_step=" << *res.first_mismatch_step << '\n';
  if (final_pose) {
    std::cout << "final_x=" << tiba::format_double(final_pose->x) << "\nfinal_y=" << tiba::format_double(final_pose->y)
              << "\nfinal_theta=" << tiba::format_double(final_pose->theta) << '\n';
  }
  std::cout << tiba::format_metrics(tiba::compute_metrics(res.log));
  return res.identical ? 0 : 1;
}

int cmd_metrics(const std::string& path) {
  std::cout << tiba::format_metrics(tiba::compute_metrics(tiba::RunLog::load(path)));
  return 0;
}

int cmd_serve_replay(const std::string& path, double speed) {
  const auto log = tiba::RunLog::load(path);
  tiba::service::TelemetryServer server("0.0.0.0", tiba::service::port_from_env(), [](const auto&) {});
  std::cerr << "serving replay on ws://0.0.0.0:" << server.port() << "\n";
  // Let a console connect before the stream starts.
  for (int i = 0; i < 50 && server.client_count() == 0 && !g_stop; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  tiba::service::serve_replay(log, server, speed, &g_stop);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skid-steer tankette simulator for sugarcane row tunnels"};
  app.require_subcommand(1);

  double mass = 130.0, mu = 0.6, radius = 0.2, ratio = 50.0, torque = 1.57, rpm = 3000.0, g = 9.8;
  bool kv = false;
  auto* size = app.add_subcommand("size", "Drivetrain torque and speed sizing report");
  size->add_option("--mass", mass, "Robot mass, kg")->capture_default_str();
  size->add_option("--mu", mu, "Worst-case friction coefficient")->capture_default_str();
  size->add_option("--wheel-radius", radius, "Wheel radius, m")->capture_default_str();
  size->add_option("--gear-ratio", ratio, "Gearbox ratio")->capture_default_str();
  size->add_option("--motor-torque", torque, "Rated motor torque, N.m")->capture_default_str();
  size->add_option("--free-speed", rpm, "Motor free speed, rpm")->capture_default_str();
  size->add_option("--g", g, "Gravity, m/s^2")->capture_default_str();
  size->add_flag("--kv", kv, "Print key=value lines instead of a table");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run a scenario through the full stack");
  run->add_option("--scenario", ra.scenario, "Scenario file (key = value)");
  run->add_option("--nav", ra.nav, "Navigation mode: thermal, lidar, waypoint or teleop");
  run->add_option("--seed", ra.seed, "Seed (overrides the scenario file)");
  run->add_option("--duration", ra.duration, "Run length limit, s");
  run->add_option("--log", ra.log_path, "Run log path")->capture_default_str();
  run->add_flag("--no-log", ra.no_log, "Do not write the run log");
  run->add_flag("--serve", ra.serve, "Serve live telemetry and accept commands over WebSocket");
  run->add_option("--speed", ra.speed, "Wall-clock speed factor with --serve")->capture_default_str();

  std::string replay_path, replay_out;
  auto* rep = app.add_subcommand("replay", "Re-drive a log and verify it reproduces bit-identically");
  rep->add_option("log", replay_path, "Run log")->required();
  rep->add_option("--out", replay_out, "Write the regenerated log here");

  std::string metrics_path;
  auto* met = app.add_subcommand("metrics", "Compute run metrics from a log");
  met->add_option("log", metrics_path, "Run log")->required();

  std::string sr_path;
  double sr_speed = 1.0;
  auto* sr = app.add_subcommand("serve-replay", "Stream a recorded log over WebSocket");
  sr->add_option("log", sr_path, "Run log")->required();
  sr->add_option("--speed", sr_speed, "Playback speed factor")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*size) return cmd_size(mass, mu, radius, ratio, torque, rpm, g, kv);
    if (*run) return cmd_run(ra);
    if (*rep) return cmd_replay(replay_path, replay_out);
    if (*met) return cmd_metrics(metrics_path);
    if (*sr) return cmd_serve_replay(sr_path, sr_speed);
  } catch (const tiba::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const tiba::InvalidSpec& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const tiba::InvalidParams& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const tiba::CorruptLog& e) {
    std::cerr << "corrupt log: " << e.what() << '\n';
    return 3;
  } catch (const tiba::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
