// Randomized invariants. Each property draws its cases from a fixed-seed
// generator so failures reproduce; the case index is printed on failure.

#include <doctest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "tiba/kv_config.hpp"
#include "tiba/nav.hpp"
#include "tiba/pipeline.hpp"
#include "tiba/runlog.hpp"
#include "tiba/simcore.hpp"
#include "tiba/world.hpp"

using namespace tiba;

namespace {

constexpr int kCases = 500;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  // Any finite double, including subnormals and huge magnitudes.
  double any_finite() {
    for (;;) {
      const double d = std::bit_cast<double>(rng_());
      if (std::isfinite(d)) return d;
    }
  }

  Twist twist(double v_max, double w_max) { return {uniform(-v_max, v_max), uniform(-w_max, w_max)}; }
  Pose2D pose() { return {uniform(-50.0, 50.0), uniform(-5.0, 5.0), uniform(-3.14, 3.14)}; }

  std::vector<std::uint8_t> bytes(int max_len) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(integer(0, max_len)));
    for (auto& b : out) b = static_cast<std::uint8_t>(integer(0, 255));
    return out;
  }

  ScenarioSpec scenario() {
    ScenarioSpec s;
    s.seed = rng_();
    s.length_m = uniform(2.0, 60.0);
    s.row_spacing_m = uniform(0.8, 2.0);
    s.height_class = static_cast<HeightClass>(integer(1, 3));
    s.stem_pitch_m = uniform(0.2, 1.0);
    s.stem_jitter_m = uniform(0.0, 0.1);
    s.sand_fraction = uniform(0.0, 1.0);
    return s;
  }

 private:
  std::mt19937_64 rng_;
};

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

TEST_CASE("twist to wheel speeds inverts exactly below the limit") {
  Gen g(1);
  const RobotParams p;
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    const Twist t = g.twist(0.5, 0.5);
    const auto w = twist_to_wheel_speeds(t, p);
    const auto back = wheel_speeds_to_twist(w, p);
    CHECK(std::abs(back.v - t.v) < 1e-12);
    CHECK(std::abs(back.omega - t.omega) < 1e-12);
  }
}

TEST_CASE("saturated wheel speeds stay within the limit and keep the turn radius") {
  Gen g(2);
  const RobotParams p;
  const double lim = p.wheel_speed_limit();
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    const Twist t = g.twist(5.0, 10.0);
    const auto w = twist_to_wheel_speeds(t, p);
    CHECK(std::abs(w.left) <= lim * (1.0 + 1e-12));
    CHECK(std::abs(w.right) <= lim * (1.0 + 1e-12));
    const auto back = wheel_speeds_to_twist(w, p);
    // Same direction of travel, same curvature.
    CHECK(back.v * t.omega == doctest::Approx(back.omega * t.v).epsilon(1e-9));
  }
}

TEST_CASE("pose integration composes over split steps and runs backwards") {
  Gen g(3);
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    const Pose2D p0 = g.pose();
    const Twist t = g.twist(1.5, 2.0);
    const double dt = g.uniform(0.001, 0.5);
    const auto once = integrate_pose(p0, t, 2.0 * dt);
    const auto twice = integrate_pose(integrate_pose(p0, t, dt), t, dt);
    CHECK(std::abs(once.x - twice.x) < 1e-9);
    CHECK(std::abs(once.y - twice.y) < 1e-9);
    CHECK(std::abs(normalize_angle(once.theta - twice.theta)) < 1e-9);
    const auto back = integrate_pose(once, {-t.v, -t.omega}, 2.0 * dt);
    CHECK(std::abs(back.x - p0.x) < 1e-9);
    CHECK(std::abs(back.y - p0.y) < 1e-9);
    CHECK(std::abs(normalize_angle(back.theta - p0.theta)) < 1e-9);
  }
}

TEST_CASE("hall ticks never drift more than half a tick from the shaft angle") {
  Gen g(4);
  const RobotParams p;
  const double ticks_per_rad = p.ticks_per_motor_rev * p.gear_ratio / (2.0 * std::numbers::pi);
  for (int run = 0; run < 20; ++run) {
    CAPTURE(run);
    DriveState s;
    double angle_left = 0.0, angle_right = 0.0;
    for (int k = 0; k < 300; ++k) {
      const WheelSpeeds cmd{g.uniform(-6.0, 6.0), g.uniform(-6.0, 6.0)};
      const auto r = step_motors(s, cmd, surfaces::kClay, surfaces::kSand, p, kStepDt);
      s = r.state;
      angle_left += r.mean_speeds.left * kStepDt;
      angle_right += r.mean_speeds.right * kStepDt;
      CHECK(std::abs(static_cast<double>(s.left.hall_ticks) - angle_left * ticks_per_rad) <= 0.5 + 1e-6);
      CHECK(std::abs(static_cast<double>(s.right.hall_ticks) - angle_right * ticks_per_rad) <= 0.5 + 1e-6);
      CHECK(std::abs(s.left.speed) <= p.wheel_speed_limit() * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("equal ticks on both sides never change the odometry heading") {
  Gen g(5);
  const RobotParams p;
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    OdometryEstimate est;
    est.pose = g.pose();
    const auto n = static_cast<std::int64_t>(g.integer(-2000, 2000));
    const auto out = odometry_update(est, n, n, p, kStepDt);
    CHECK(out.pose.theta == est.pose.theta);
    CHECK(out.omega == 0.0);
  }
}

TEST_CASE("sun sensor round trip across the field of view and any cloud") {
  Gen g(6);
  SolarSensorConfig cfg;
  cfg.noise_sigma = 0.0;
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    // Stay inside the diamond |tan ax| + |tan ay| <= 1 where every cell is lit.
    const double fx = g.uniform(-0.99, 0.99);
    const double fy = g.uniform(-1.0, 1.0) * (0.99 - std::abs(fx));
    const SolarAngles in{std::atan(fx), std::atan(fy)};
    SunState sun;
    sun.cloud_factor = g.uniform(0.1, 1.0);
    const auto r = solar_synthesize(in, sun, cfg);
    CHECK(r.valid);
    const auto out = solar_estimate(r, cfg);
    CHECK(std::abs(out.alpha_x - in.alpha_x) < 1e-12);
    CHECK(std::abs(out.alpha_y - in.alpha_y) < 1e-12);
  }
}

TEST_CASE("bus frames round trip to the milli-rad/s quantum") {
  Gen g(7);
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    const WheelSpeeds w{g.uniform(-1000.0, 1000.0), g.uniform(-1000.0, 1000.0)};
    const auto back = decode_wheel_command(encode_wheel_command(w));
    CHECK(std::abs(back.left - w.left) <= 0.0005 + 1e-12);
    CHECK(std::abs(back.right - w.right) <= 0.0005 + 1e-12);
    // A decoded frame is a fixed point.
    CHECK(decode_wheel_command(encode_wheel_command(back)) == back);
  }
}

TEST_CASE("number formatting round trips every finite double") {
  Gen g(8);
  for (int i = 0; i < 5 * kCases; ++i) {
    CAPTURE(i);
    const double d = g.any_finite();
    KvConfig kv;
    kv.set("x", d);
    const auto back = KvConfig::parse(kv.to_text()).get_double("x", 0.0);
    CHECK(same_bits(back, d));
  }
}

TEST_CASE("records round trip with arbitrary numbers") {
  Gen g(9);
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    const RunRecord pose{g.uniform(0, 1e4), static_cast<std::uint64_t>(g.integer(0, 1 << 30)),
                         PoseRec{{g.any_finite(), g.any_finite(), g.any_finite()},
                                 {{g.any_finite(), g.any_finite(), g.any_finite()}, g.any_finite(), g.any_finite()}}};
    CHECK(parse_record(serialize_record(pose)) == pose);
    const RunRecord wheel{1.0, 1,
                          WheelRec{{g.any_finite(), g.any_finite()},
                                   {g.any_finite(), g.any_finite()},
                                   static_cast<std::int64_t>(g.any_finite() > 0 ? 1 : -1) * g.integer(0, 1 << 30),
                                   g.integer(-1000, 1000)}};
    CHECK(parse_record(serialize_record(wheel)) == wheel);
    const RunRecord cmd{2.0, 2, CommandRec{g.coin() ? "nav" : "teleop_box", {g.any_finite(), g.any_finite()}, "", false}};
    CHECK(parse_record(serialize_record(cmd)) == cmd);
  }
}

TEST_CASE("base64 round trips arbitrary bytes") {
  Gen g(10);
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    const auto b = g.bytes(200);
    const auto text = base64_encode(b);
    CHECK(text.size() % 4 == 0);
    CHECK(base64_decode(text) == b);
  }
}

TEST_CASE("generated tunnels respect their spec") {
  Gen g(11);
  for (int i = 0; i < 100; ++i) {
    CAPTURE(i);
    const auto spec = g.scenario();
    const auto sc = generate_tunnel(spec.seed, spec);
    const auto count = static_cast<std::size_t>(std::llround(spec.length_m / spec.stem_pitch_m));
    CHECK(sc.stems_left.size() == count);
    CHECK(sc.stems_right.size() == count);
    const double half = spec.row_spacing_m / 2.0;
    for (const auto* row : {&sc.stems_left, &sc.stems_right}) {
      const double side = row == &sc.stems_left ? 1.0 : -1.0;
      for (std::size_t k = 0; k < row->size(); ++k) {
        const auto& s = (*row)[k];
        CHECK(std::abs(s.center.y - side * half) <= spec.stem_jitter_m + 1e-12);
        CHECK(s.radius > 0.0);
        if (k > 0) CHECK((*row)[k - 1].center.x <= s.center.x);
      }
    }
    CHECK(sc.canopy.empty() == (spec.height_class != HeightClass::kH3));
    CHECK(serialize(generate_tunnel(spec.seed, spec)) == serialize(sc));
    // Every in-bounds point has a surface.
    for (int k = 0; k < 20; ++k) {
      const Vec2 pt{g.uniform(0.0, spec.length_m), g.uniform(-half, half)};
      CHECK_NOTHROW(surface_at(sc, pt));
    }
  }
}

TEST_CASE("steering output is bounded") {
  Gen g(12);
  const SteerGains gains;
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    const CorridorEstimate est{g.uniform(-3, 3), g.uniform(-3, 3), g.uniform(-0.5, 1.5)};
    const double v_ref = g.uniform(0.0, 1.2);
    const auto t = corridor_steer(est, gains, v_ref);
    CHECK(std::abs(t.omega) <= gains.omega_max);
    CHECK(t.v >= 0.0);
    CHECK(t.v <= v_ref);
  }
}

TEST_CASE("teleop setpoints stay inside their limits") {
  Gen g(13);
  TeleopMapper m;
  Twist t;
  for (int i = 0; i < 5 * kCases; ++i) {
    CAPTURE(i);
    const auto step = static_cast<GainStep>(g.integer(0, 2));
    t = m.map({g.uniform(-2, 2), g.uniform(-2, 2), g.integer(0, 9) > 0, step}, t);
    CHECK(std::abs(t.v) <= m.config().v_max);
    CHECK(std::abs(t.omega) <= m.config().omega_max);
  }
}

TEST_CASE("power accounting only ever consumes energy") {
  Gen g(14);
  const VssConfig cfg;
  const Ambient amb;
  auto s = initial_vss_state(cfg, amb);
  const std::vector<std::string> names{"drive", "lidar", "thermal_camera", "lights"};
  for (int i = 0; i < 20 * kCases; ++i) {
    CAPTURE(i);
    std::vector<RelayCommand> cmds;
    if (g.integer(0, 50) == 0) cmds.push_back({names[static_cast<std::size_t>(g.integer(0, 3))], g.coin()});
    const auto next = vss_step(s, cmds, {g.uniform(-200.0, 800.0)}, cfg, amb, kStepDt).state;
    CHECK(next.energy_used_wh >= s.energy_used_wh);
    CHECK(next.state_of_charge <= s.state_of_charge);
    CHECK(next.state_of_charge >= 0.0);
    CHECK(next.bus12_current >= cfg.computer_idle_a);
    s = next;
  }
}

TEST_CASE("angle normalization lands in (-pi, pi] and keeps the direction") {
  Gen g(15);
  for (int i = 0; i < kCases; ++i) {
    CAPTURE(i);
    const double a = g.uniform(-1000.0, 1000.0);
    const double n = normalize_angle(a);
    CHECK(n > -std::numbers::pi);
    CHECK(n <= std::numbers::pi);
    CHECK(std::abs(std::sin(n) - std::sin(a)) < 1e-9);
    CHECK(std::abs(std::cos(n) - std::cos(a)) < 1e-9);
  }
}
