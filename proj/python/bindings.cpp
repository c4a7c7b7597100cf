#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tiba/drivetrain.hpp"
#include "tiba/error.hpp"
#include "tiba/pipeline.hpp"
#include "tiba/sensors.hpp"
#include "tiba/sim.hpp"
#include "tiba/simcore.hpp"

namespace py = pybind11;
using namespace tiba;

namespace {

py::dict metrics_dict(const RunMetrics& m) {
  py::dict d;
  d["cross_track_rms"] = m.cross_track_rms;
  d["cross_track_max"] = m.cross_track_max;
  d["stem_collisions"] = m.stem_collisions;
  d["distance_traveled"] = m.distance_traveled;
  d["completion"] = m.completion;
  d["energy_used_wh"] = m.energy_used_wh;
  return d;
}

std::string log_text(const RunLog& log) {
  std::ostringstream os;
  log.write(os);
  return os.str();
}

RunLog log_from_text(const std::string& text) {
  std::istringstream in(text);
  return RunLog::read(in);
}

// Scenario text plus optional overrides, the way the command line applies them.
RunConfig make_config(const std::string& text, std::optional<std::uint64_t> seed, std::optional<std::string> nav,
                      std::optional<double> duration) {
  auto kv = KvConfig::parse(text);
  if (seed) kv.set("seed", std::to_string(*seed));
  if (nav) kv.set("nav.mode", *nav);
  if (duration) kv.set("run.duration_s", *duration);
  return RunConfig::from_config(kv);
}

}  // namespace

PYBIND11_MODULE(_tiba, m) {
  m.doc() = "Skid-steer tankette simulator and navigation stack";

  auto base = py::register_exception<Error>(m, "TibaError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<InvalidSpec>(m, "InvalidSpec", base);
  py::register_exception<InvalidParams>(m, "InvalidParams", base);
  py::register_exception<OutOfBounds>(m, "OutOfBounds", base);
  py::register_exception<DivisionByZero>(m, "DivisionByZero", base);
  py::register_exception<InsufficientLight>(m, "InsufficientLight", base);
  py::register_exception<NoPath>(m, "NoPath", base);
  py::register_exception<NoCorridor>(m, "NoCorridor", base);
  py::register_exception<IllConditioned>(m, "IllConditioned", base);
  py::register_exception<MalformedFrame>(m, "MalformedFrame", base);
  py::register_exception<CorruptLog>(m, "CorruptLog", base);

  py::class_<Pose2D>(m, "Pose2D")
      .def(py::init<double, double, double>(), py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("theta") = 0.0)
      .def_readwrite("x", &Pose2D::x)
      .def_readwrite("y", &Pose2D::y)
      .def_readwrite("theta", &Pose2D::theta)
      .def("__repr__", [](const Pose2D& p) {
        return "Pose2D(x=" + format_double(p.x) + ", y=" + format_double(p.y) + ", theta=" + format_double(p.theta) +
               ")";
      });

  py::class_<Twist>(m, "Twist")
      .def(py::init<double, double>(), py::arg("v") = 0.0, py::arg("omega") = 0.0)
      .def_readwrite("v", &Twist::v)
      .def_readwrite("omega", &Twist::omega);

  py::class_<WheelSpeeds>(m, "WheelSpeeds")
      .def(py::init<double, double>(), py::arg("left") = 0.0, py::arg("right") = 0.0)
      .def_readwrite("left", &WheelSpeeds::left)
      .def_readwrite("right", &WheelSpeeds::right);

  py::class_<RobotParams>(m, "RobotParams")
      .def(py::init<>())
      .def_readwrite("mass", &RobotParams::mass)
      .def_readwrite("wheel_radius", &RobotParams::wheel_radius)
      .def_readwrite("track_width", &RobotParams::track_width)
      .def_readwrite("gear_ratio", &RobotParams::gear_ratio)
      .def_readwrite("motor_rated_torque", &RobotParams::motor_rated_torque)
      .def_readwrite("motor_free_speed", &RobotParams::motor_free_speed)
      .def_readwrite("body_width", &RobotParams::body_width)
      .def_readwrite("slip_widening_factor", &RobotParams::slip_widening_factor)
      .def("max_speed", &RobotParams::max_speed)
      .def("tick_quantum_m", &RobotParams::tick_quantum_m);

  m.def(
      "sizing_report",
      [](double mass, double mu, double wheel_radius, double gear_ratio, double motor_torque, double free_speed_rpm,
         double g) {
        RobotParams p;
        p.mass = mass;
        p.wheel_radius = wheel_radius;
        p.gear_ratio = gear_ratio;
        p.motor_rated_torque = motor_torque;
        p.motor_free_speed = free_speed_rpm;
        const auto r = sizing_report(p, {SurfaceKind::kSand, mu, 0.0}, g);
        py::dict d;
        d["normal_force_per_wheel"] = r.normal_force_per_wheel;
        d["friction_force_per_wheel"] = r.friction_force_per_wheel;
        d["torque_per_wheel"] = r.torque_per_wheel;
        d["required_side_torque"] = r.required_side_torque;
        d["gearbox_output_torque"] = r.gearbox_output_torque;
        d["torque_margin"] = r.torque_margin;
        d["max_linear_speed"] = r.max_linear_speed;
        d["feasible"] = r.feasible;
        return d;
      },
      py::arg("mass") = 130.0, py::arg("mu") = 0.6, py::arg("wheel_radius") = 0.2, py::arg("gear_ratio") = 50.0,
      py::arg("motor_torque") = 1.57, py::arg("free_speed_rpm") = 3000.0, py::arg("g") = 9.8);

  m.def("twist_to_wheel_speeds", &twist_to_wheel_speeds, py::arg("twist"), py::arg("robot") = RobotParams{});
  m.def("wheel_speeds_to_twist", &wheel_speeds_to_twist, py::arg("wheels"), py::arg("robot") = RobotParams{});
  m.def("integrate_pose", &integrate_pose, py::arg("pose"), py::arg("twist"), py::arg("dt"));

  m.def(
      "solar_synthesize",
      [](double alpha_x, double alpha_y, double c, double total_volts) {
        const auto r = solar_synthesize({alpha_x, alpha_y}, SunState{}, c, total_volts);
        return py::make_tuple(r.v1, r.v2, r.v3, r.v4);
      },
      py::arg("alpha_x"), py::arg("alpha_y"), py::arg("c") = 1.0, py::arg("total_volts") = 2.0);
  m.def(
      "solar_estimate",
      [](double v1, double v2, double v3, double v4, double c, double threshold) {
        const auto a = solar_estimate(SolarReading{v1, v2, v3, v4, true}, c, threshold);
        return py::make_tuple(a.alpha_x, a.alpha_y);
      },
      py::arg("v1"), py::arg("v2"), py::arg("v3"), py::arg("v4"), py::arg("c") = 1.0, py::arg("threshold") = 0.0);

  m.def(
      "encode_wheel_command",
      [](double left, double right) {
        const auto f = encode_wheel_command({left, right});
        return py::make_tuple(f.id, py::bytes(reinterpret_cast<const char*>(f.data.data()), f.dlc));
      },
      py::arg("left"), py::arg("right"));
  m.def(
      "decode_wheel_command",
      [](const py::bytes& payload, std::uint16_t id) {
        const std::string raw = payload;
        if (raw.size() > 8) throw MalformedFrame("payload longer than 8 bytes");
        BusFrame f;
        f.id = id;
        f.dlc = static_cast<std::uint8_t>(raw.size());
        std::copy(raw.begin(), raw.end(), f.data.begin());
        const auto w = decode_wheel_command(f);
        return py::make_tuple(w.left, w.right);
      },
      py::arg("payload"), py::arg("id") = kWheelCommandId);

  m.def(
      "run",
      [](const std::string& scenario_text, std::optional<std::uint64_t> seed, std::optional<std::string> nav,
         std::optional<double> duration) {
        const auto cfg = make_config(scenario_text, seed, nav, duration);
        RunResult res;
        {
          py::gil_scoped_release release;
          res = run_scenario(cfg);
        }
        return py::make_tuple(metrics_dict(res.metrics), log_text(res.log));
      },
      py::arg("scenario_text") = "", py::arg("seed") = py::none(), py::arg("nav") = py::none(),
      py::arg("duration") = py::none(),
      "Runs a scenario given as key = value text. Returns (metrics, log_text).");

  m.def(
      "metrics", [](const std::string& log) { return metrics_dict(compute_metrics(log_from_text(log))); },
      py::arg("log_text"));

  m.def(
      "replay",
      [](const std::string& log) {
        const auto original = log_from_text(log);
        ReplayResult r;
        {
          py::gil_scoped_release release;
          r = replay(original);
        }
        return py::make_tuple(r.identical, metrics_dict(compute_metrics(r.log)));
      },
      py::arg("log_text"), "Re-drives a log. Returns (identical, metrics).");
}
