#include "tiba/world.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tiba/error.hpp"
#include "tiba/random.hpp"

namespace tiba {

void RobotParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParams(std::string(name) + " must be positive");
  };
  positive(mass, "mass");
  positive(wheel_radius, "wheel_radius");
  positive(track_width, "track_width");
  positive(wheelbase, "wheelbase");
  positive(gear_ratio, "gear_ratio");
  positive(motor_rated_torque, "motor_rated_torque");
  positive(motor_free_speed, "motor_free_speed");
  positive(ticks_per_motor_rev, "ticks_per_motor_rev");
  positive(body_width, "body_width");
  positive(body_length, "body_length");
  positive(motor_time_constant, "motor_time_constant");
  if (gear_ratio < 1.0) throw InvalidParams("gear_ratio must be >= 1");
  if (slip_widening_factor < 1.0) throw InvalidParams("slip_widening_factor must be >= 1");
}

double RobotParams::wheel_speed_limit() const {
  return 2.0 * std::numbers::pi * motor_free_speed / (60.0 * gear_ratio);
}

double RobotParams::max_speed() const { return wheel_speed_limit() * wheel_radius; }

double RobotParams::max_yaw_rate() const { return 2.0 * max_speed() / effective_track(); }

double RobotParams::tick_quantum_rad() const {
  return 2.0 * std::numbers::pi / (ticks_per_motor_rev * gear_ratio);
}

std::string_view to_string(SurfaceKind k) {
  switch (k) {
    case SurfaceKind::kSand: return "sand";
    case SurfaceKind::kClay: return "clay";
    case SurfaceKind::kCrevice: return "crevice";
    case SurfaceKind::kPavement: return "pavement";
  }
  return "?";
}

SurfaceParams surfaces::crevice_over(const SurfaceParams& base) {
  return {SurfaceKind::kCrevice, base.mu * 0.5, base.c_rr * 2.0};
}

std::string_view to_string(HeightClass h) {
  switch (h) {
    case HeightClass::kH1: return "H1";
    case HeightClass::kH2: return "H2";
    case HeightClass::kH3: return "H3";
  }
  return "?";
}

HeightClass parse_height_class(std::string_view s) {
  if (s == "H1" || s == "h1" || s == "1") return HeightClass::kH1;
  if (s == "H2" || s == "h2" || s == "2") return HeightClass::kH2;
  if (s == "H3" || s == "h3" || s == "3") return HeightClass::kH3;
  throw ConfigError("unknown height_class: " + std::string(s));
}

bool point_in_polygon(const Polygon& poly, Vec2 p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace {

Polygon parse_polygon(const std::string& text) {
  Polygon poly;
  std::istringstream ss(text);
  std::string vertex;
  while (ss >> vertex) {
    const auto comma = vertex.find(',');
    if (comma == std::string::npos) throw ConfigError("crevice vertex must be x,y: " + vertex);
    const auto x = parse_double(std::string_view(vertex).substr(0, comma));
    const auto y = parse_double(std::string_view(vertex).substr(comma + 1));
    if (!x || !y) throw ConfigError("crevice vertex is not numeric: " + vertex);
    poly.push_back({*x, *y});
  }
  if (poly.size() < 3) throw ConfigError("crevice polygon needs at least 3 vertices");
  return poly;
}

std::string polygon_text(const Polygon& poly) {
  std::string out;
  for (const auto& v : poly) {
    if (!out.empty()) out += ' ';
    out += format_double(v.x) + "," + format_double(v.y);
  }
  return out;
}

}  // namespace

ScenarioSpec ScenarioSpec::from_config(const KvConfig& cfg) {
  ScenarioSpec s;
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  s.length_m = cfg.get_double("length_m", s.length_m);
  s.row_spacing_m = cfg.get_double("row_spacing_m", s.row_spacing_m);
  s.height_class = parse_height_class(cfg.get_string("height_class", "H1"));
  s.stem_pitch_m = cfg.get_double("stem_pitch_m", s.stem_pitch_m);
  s.stem_jitter_m = cfg.get_double("stem_jitter_m", s.stem_jitter_m);
  s.stem_radius_m = cfg.get_double("stem_radius_m", s.stem_radius_m);
  s.stem_radius_jitter = cfg.get_double("stem_radius_jitter", s.stem_radius_jitter);
  s.canopy_overhang_m = cfg.get_double("canopy_overhang_m", s.canopy_overhang_m);
  s.canopy_bottom_m = cfg.get_double("canopy_bottom_m", s.canopy_bottom_m);
  s.sand_fraction = cfg.get_double("sand_fraction", s.sand_fraction);
  s.surface_cell_m = cfg.get_double("surface_cell_m", s.surface_cell_m);
  s.bounds_margin_m = cfg.get_double("bounds_margin_m", s.bounds_margin_m);
  const auto ground = cfg.get_string("ground", "field");
  if (ground == "field") {
    s.ground = GroundKind::kField;
  } else if (ground == "pavement") {
    s.ground = GroundKind::kPavement;
  } else {
    throw ConfigError("unknown ground: " + ground);
  }
  for (const auto& c : cfg.all("crevice")) s.crevices.push_back(parse_polygon(c));
  s.sun.azimuth = deg2rad(cfg.get_double("sun.azimuth_deg", rad2deg(s.sun.azimuth)));
  s.sun.elevation = deg2rad(cfg.get_double("sun.elevation_deg", rad2deg(s.sun.elevation)));
  s.sun.cloud_factor = cfg.get_double("sun.cloud_factor", s.sun.cloud_factor);
  return s;
}

void ScenarioSpec::write_config(KvConfig& cfg) const {
  cfg.set("seed", std::to_string(seed));
  cfg.set("length_m", length_m);
  cfg.set("row_spacing_m", row_spacing_m);
  cfg.set("height_class", std::string(to_string(height_class)));
  cfg.set("stem_pitch_m", stem_pitch_m);
  cfg.set("stem_jitter_m", stem_jitter_m);
  cfg.set("stem_radius_m", stem_radius_m);
  cfg.set("stem_radius_jitter", stem_radius_jitter);
  cfg.set("canopy_overhang_m", canopy_overhang_m);
  cfg.set("canopy_bottom_m", canopy_bottom_m);
  cfg.set("sand_fraction", sand_fraction);
  cfg.set("surface_cell_m", surface_cell_m);
  cfg.set("bounds_margin_m", bounds_margin_m);
  cfg.set("ground", ground == GroundKind::kField ? "field" : "pavement");
  cfg.erase("crevice");
  for (const auto& c : crevices) cfg.add("crevice", polygon_text(c));
  cfg.set("sun.azimuth_deg", rad2deg(sun.azimuth));
  cfg.set("sun.elevation_deg", rad2deg(sun.elevation));
  cfg.set("sun.cloud_factor", sun.cloud_factor);
}

double TunnelScenario::max_stem_radius() const {
  double r = 0.0;
  for (const auto* row : {&stems_left, &stems_right}) {
    for (const auto& s : *row) r = std::max(r, s.radius);
  }
  return r;
}

TunnelScenario generate_tunnel(std::uint64_t seed, const ScenarioSpec& spec) {
  if (!(spec.row_spacing_m > 0.0)) throw InvalidSpec("row_spacing_m must be positive");
  if (!(spec.length_m > 0.0)) throw InvalidSpec("length_m must be positive");
  if (!(spec.stem_pitch_m > 0.0)) throw InvalidSpec("stem_pitch_m must be positive");
  if (!(spec.stem_radius_m > 0.0)) throw InvalidSpec("stem_radius_m must be positive");
  if (!(spec.surface_cell_m > 0.0)) throw InvalidSpec("surface_cell_m must be positive");
  if (spec.stem_jitter_m < 0.0 || spec.stem_radius_jitter < 0.0 || spec.stem_radius_jitter >= 1.0) {
    throw InvalidSpec("stem jitter out of range");
  }
  if (spec.sand_fraction < 0.0 || spec.sand_fraction > 1.0) throw InvalidSpec("sand_fraction must be in [0, 1]");
  if (spec.sun.elevation < 0.0 || spec.sun.elevation > std::numbers::pi / 2) {
    throw InvalidSpec("sun elevation must be in [0, pi/2]");
  }
  if (spec.sun.cloud_factor < 0.0 || spec.sun.cloud_factor > 1.0) throw InvalidSpec("cloud_factor must be in [0, 1]");
  for (const auto& c : spec.crevices) {
    if (c.size() < 3) throw InvalidSpec("crevice polygon needs at least 3 vertices");
  }

  TunnelScenario sc;
  sc.row_spacing = spec.row_spacing_m;
  sc.tunnel_length = spec.length_m;
  sc.plant_height_class = spec.height_class;
  sc.sand_fraction = spec.sand_fraction;
  sc.surface_cell = spec.surface_cell_m;
  sc.ground = spec.ground;
  sc.crevices = spec.crevices;
  sc.stem_jitter = spec.stem_jitter_m;
  sc.sun = spec.sun;
  sc.seed = seed;

  Rng rng = substream(seed, Stream::kScenario);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const auto count = static_cast<std::size_t>(std::llround(spec.length_m / spec.stem_pitch_m));
  const double half = spec.row_spacing_m / 2.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double nominal_x = (static_cast<double>(i) + 0.5) * spec.stem_pitch_m;
    // Draw order is fixed: left then right, x then y then radius.
    for (int side : {+1, -1}) {
      Stem s;
      s.center.x = nominal_x + spec.stem_jitter_m * unit(rng);
      s.center.y = side * half + spec.stem_jitter_m * unit(rng);
      s.radius = spec.stem_radius_m * (1.0 + spec.stem_radius_jitter * unit(rng));
      (side > 0 ? sc.stems_left : sc.stems_right).push_back(s);
    }
  }
  const auto by_x = [](const Stem& a, const Stem& b) { return a.center.x < b.center.x; };
  std::stable_sort(sc.stems_left.begin(), sc.stems_left.end(), by_x);
  std::stable_sort(sc.stems_right.begin(), sc.stems_right.end(), by_x);

  if (spec.height_class == HeightClass::kH3) {
    sc.canopy_overhang = spec.canopy_overhang_m;
    sc.canopy_bottom = spec.canopy_bottom_m;
    if (sc.canopy_overhang > 0.0) {
      sc.canopy.push_back({0.0, spec.length_m, half - sc.canopy_overhang, half});
      sc.canopy.push_back({0.0, spec.length_m, -half, -half + sc.canopy_overhang});
    }
  }

  const double m = spec.bounds_margin_m;
  sc.bounds = {-m, spec.length_m + m, -half - m, half + m};
  return sc;
}

SurfaceParams surface_at(const TunnelScenario& scenario, Vec2 point) {
  if (!scenario.bounds.contains(point)) {
    throw OutOfBounds("point (" + format_double(point.x) + ", " + format_double(point.y) + ") outside scenario");
  }
  SurfaceParams base;
  if (scenario.ground == GroundKind::kPavement) {
    base = surfaces::kPavement;
  } else {
    const auto cx = static_cast<std::int64_t>(std::floor(point.x / scenario.surface_cell));
    const auto cy = static_cast<std::int64_t>(std::floor(point.y / scenario.surface_cell));
    const std::uint64_t cell_key = splitmix64(static_cast<std::uint64_t>(cx)) ^ static_cast<std::uint64_t>(cy);
    const double u = hash_unit(mix_seed(scenario.seed, Stream::kSurface, cell_key));
    base = u < scenario.sand_fraction ? surfaces::kSand : surfaces::kClay;
  }
  for (const auto& c : scenario.crevices) {
    if (point_in_polygon(c, point)) return surfaces::crevice_over(base);
  }
  return base;
}

std::string serialize(const TunnelScenario& sc) {
  std::ostringstream out;
  out.precision(17);
  out << "row_spacing " << sc.row_spacing << "\nlength " << sc.tunnel_length << "\nheight "
      << to_string(sc.plant_height_class) << "\ncanopy " << sc.canopy_overhang << ' ' << sc.canopy_bottom
      << "\nsand_fraction " << sc.sand_fraction << "\ncell " << sc.surface_cell << "\nseed " << sc.seed
      << "\nsun " << sc.sun.azimuth << ' ' << sc.sun.elevation << ' ' << sc.sun.cloud_factor << '\n';
  for (const auto* row : {&sc.stems_left, &sc.stems_right}) {
    out << "row " << row->size() << '\n';
    for (const auto& s : *row) out << s.center.x << ' ' << s.center.y << ' ' << s.radius << '\n';
  }
  for (const auto& r : sc.canopy) out << "canopy_rect " << r.x_min << ' ' << r.x_max << ' ' << r.y_min << ' ' << r.y_max << '\n';
  for (const auto& c : sc.crevices) {
    out << "crevice";
    for (const auto& v : c) out << ' ' << v.x << ',' << v.y;
    out << '\n';
  }
  return out.str();
}

}  // namespace tiba
