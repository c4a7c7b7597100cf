#include "tiba/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tiba/error.hpp"
#include "tiba/simcore.hpp"

namespace tiba {

// ---------------------------------------------------------------------------
// Sun sensor

SolarReading solar_synthesize(const SolarAngles& angles, const SunState& sun, const SolarSensorConfig& cfg) {
  const double fx = std::tan(angles.alpha_x) / cfg.c;
  const double fy = std::tan(angles.alpha_y) / cfg.c;
  const double s = cfg.nominal_sum * sun.cloud_factor;

  SolarReading r;
  r.v1 = s * (1.0 + fx - fy) / 4.0;
  r.v2 = s * (1.0 + fx + fy) / 4.0;
  r.v3 = s * (1.0 - fx + fy) / 4.0;
  r.v4 = s * (1.0 - fx - fy) / 4.0;

  const bool in_fov = std::abs(fx) + std::abs(fy) <= 1.0 && std::abs(angles.alpha_x) <= cfg.fov &&
                      std::abs(angles.alpha_y) <= cfg.fov;
  if (!in_fov) {
    // Outside the field of view the split would go negative; cells read dark.
    r.v1 = std::max(r.v1, 0.0);
    r.v2 = std::max(r.v2, 0.0);
    r.v3 = std::max(r.v3, 0.0);
    r.v4 = std::max(r.v4, 0.0);
  }
  r.valid = in_fov && r.sum() > cfg.threshold();
  return r;
}

SolarReading solar_synthesize(const SolarAngles& angles, const SunState& sun, double c, double total_volts) {
  if (!(c > 0.0) || !(total_volts > 0.0)) throw InvalidParams("sensor constant and total volts must be positive");
  SolarSensorConfig cfg;
  cfg.c = c;
  cfg.nominal_sum = total_volts;
  cfg.fov = std::numbers::pi / 2;
  return solar_synthesize(angles, sun, cfg);
}

SolarAngles solar_estimate(const SolarReading& r, const SolarSensorConfig& cfg) {
  return solar_estimate(r, cfg.c, cfg.threshold());
}

SolarAngles solar_estimate(const SolarReading& r, double c, double threshold) {
  const double sum = r.sum();
  if (!(sum > threshold) || !(sum > 0.0)) throw InsufficientLight("cell voltage sum below threshold");
  const double fx = (r.v1 + r.v2 - r.v3 - r.v4) / sum;
  const double fy = (r.v2 + r.v3 - r.v1 - r.v4) / sum;
  return {std::atan(c * fx), std::atan(c * fy)};
}

SolarAngles sun_angles_in_body(const SunState& sun, double yaw) {
  const double az = sun.azimuth - yaw;
  const double horiz = std::cos(sun.elevation);
  const double up = std::sin(sun.elevation);
  return {std::atan2(horiz * std::cos(az), up), std::atan2(horiz * std::sin(az), up)};
}

SolarReading solar_sample(const SunState& sun, double yaw, const SolarSensorConfig& cfg, Rng& rng) {
  SolarReading r = solar_synthesize(sun_angles_in_body(sun, yaw), sun, cfg);
  if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (double* v : {&r.v1, &r.v2, &r.v3, &r.v4}) *v = std::max(0.0, *v + noise(rng));
    r.valid = r.valid && r.sum() > cfg.threshold();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Lidar

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ray_circle(Vec2 o, Vec2 d, Vec2 c, double r) {
  const Vec2 oc = c - o;
  const double b = dot(oc, d);
  const double c2 = dot(oc, oc) - r * r;
  const double disc = b * b - c2;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double t0 = b - sq;
  if (t0 > 0.0) return t0;
  return kInf;  // behind the sensor, or the sensor is inside the stem
}

double ray_rect(Vec2 o, Vec2 d, const CanopyRect& rc) {
  if (rc.contains(o)) return kInf;
  double t_min = 0.0;
  double t_max = kInf;
  const double lo[2] = {rc.x_min, rc.y_min};
  const double hi[2] = {rc.x_max, rc.y_max};
  const double oo[2] = {o.x, o.y};
  const double dd[2] = {d.x, d.y};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(dd[k]) < 1e-15) {
      if (oo[k] < lo[k] || oo[k] > hi[k]) return kInf;
      continue;
    }
    double t1 = (lo[k] - oo[k]) / dd[k];
    double t2 = (hi[k] - oo[k]) / dd[k];
    if (t1 > t2) std::swap(t1, t2);
    t_min = std::max(t_min, t1);
    t_max = std::min(t_max, t2);
    if (t_min > t_max) return kInf;
  }
  return t_min > 0.0 ? t_min : kInf;
}

/// Stems whose centers lie within [x_lo, x_hi]; rows are sorted by x.
std::pair<std::size_t, std::size_t> x_window(const std::vector<Stem>& row, double x_lo, double x_hi) {
  const auto lo = std::lower_bound(row.begin(), row.end(), x_lo,
                                   [](const Stem& s, double x) { return s.center.x < x; });
  const auto hi = std::upper_bound(row.begin(), row.end(), x_hi,
                                   [](double x, const Stem& s) { return x < s.center.x; });
  return {static_cast<std::size_t>(lo - row.begin()), static_cast<std::size_t>(hi - row.begin())};
}

}  // namespace

LidarScan lidar_scan(const Pose2D& pose, const TunnelScenario& scene, const LidarConfig& cfg, std::uint64_t seed,
                     std::uint64_t frame) {
  LidarScan scan;
  scan.angle_min = cfg.angle_min;
  scan.angle_max = cfg.angle_max;
  scan.n_beams = cfg.n_beams;
  scan.max_range = cfg.max_range;
  scan.ranges.assign(static_cast<std::size_t>(cfg.n_beams), cfg.max_range);

  const Vec2 origin{pose.x, pose.y};
  const double reach = cfg.max_range + scene.max_stem_radius();
  std::vector<Stem> nearby;
  for (const auto* row : {&scene.stems_left, &scene.stems_right}) {
    const auto [a, b] = x_window(*row, pose.x - reach, pose.x + reach);
    nearby.insert(nearby.end(), row->begin() + static_cast<std::ptrdiff_t>(a), row->begin() + static_cast<std::ptrdiff_t>(b));
  }

  Rng rng = substream(seed, Stream::kLidar, frame);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double inc = scan.angle_increment();

  for (int i = 0; i < cfg.n_beams; ++i) {
    const double a = pose.theta + cfg.angle_min + i * inc;
    const Vec2 d{std::cos(a), std::sin(a)};
    double best = kInf;
    for (const auto& s : nearby) best = std::min(best, ray_circle(origin, d, s.center, s.radius));
    for (const auto& rc : scene.canopy) {
      // One draw per beam and rectangle, hit or not, keeps the stream aligned.
      const bool returns = unit(rng) < cfg.canopy_hit_prob;
      if (returns) best = std::min(best, ray_rect(origin, d, rc));
    }
    const double n = std::clamp(gauss(rng), -5.0, 5.0) * cfg.range_sigma;
    if (best < cfg.max_range) {
      scan.ranges[static_cast<std::size_t>(i)] = std::clamp(best + n, 1e-3, cfg.max_range);
    }
  }
  return scan;
}

// ---------------------------------------------------------------------------
// Thermal camera

double ThermalCamera::focal_px() const { return (width / 2.0) / std::tan(hfov / 2.0); }

Vec3 ThermalCamera::ray_body(double u, double v) const {
  const double f = focal_px();
  const double fwd = 1.0;
  const double left = -(u - cx()) / f;
  const double up = -(v - cy()) / f;
  const double cp = std::cos(pitch);
  const double sp = std::sin(pitch);
  return {fwd * cp - up * sp, left, fwd * sp + up * cp};
}

std::optional<Vec2> ThermalCamera::ground_point(double u, double v) const {
  const Vec3 r = ray_body(u, v);
  if (r.z >= 0.0) return std::nullopt;
  const double t = -mount_height / r.z;
  return Vec2{forward_offset + t * r.x, t * r.y};
}

namespace {

enum class Hit { kSky, kGround, kKerb, kPlant };

Hit trace_thermal_ray(const Vec3& o, const Vec3& d, const TunnelScenario& sc, double kerb_width, bool kerb) {
  const double w = sc.row_spacing / 2.0;
  const double h = sc.plant_height();
  double best_t = kInf;
  Hit best = Hit::kSky;

  auto consider_plane = [&](double y_plane, double z_lo, double z_hi) {
    if (std::abs(d.y) < 1e-12) return;
    const double t = (y_plane - o.y) / d.y;
    if (!(t > 0.0) || t >= best_t) return;
    const double x = o.x + t * d.x;
    const double z = o.z + t * d.z;
    if (z < z_lo || z > z_hi || x < 0.0 || x > sc.tunnel_length) return;
    best_t = t;
    best = Hit::kPlant;
  };

  consider_plane(w, 0.0, h);
  consider_plane(-w, 0.0, h);
  if (sc.canopy_overhang > 0.0) {
    consider_plane(w - sc.canopy_overhang, sc.canopy_bottom, h);
    consider_plane(-w + sc.canopy_overhang, sc.canopy_bottom, h);
  }

  if (d.z < 0.0) {
    const double t = -o.z / d.z;
    if (t < best_t) {
      const double x = o.x + t * d.x;
      const double ay = std::abs(o.y + t * d.y);
      best_t = t;
      if (x < 0.0 || x > sc.tunnel_length) {
        best = Hit::kGround;  // open headland
      } else if (ay > w) {
        best = Hit::kPlant;   // under the neighbouring rows
      } else if (kerb && ay >= w - kerb_width) {
        best = Hit::kKerb;
      } else {
        best = Hit::kGround;
      }
    }
  }
  return best;
}

}  // namespace

ThermalImage thermal_render(const Pose2D& pose, const TunnelScenario& scene, const SunState& sun,
                            const ThermalConfig& cfg, std::uint64_t seed, std::uint64_t frame) {
  const auto& cam = cfg.camera;
  ThermalImage img;
  img.width = cam.width;
  img.height = cam.height;
  img.temps.resize(static_cast<std::size_t>(cam.width) * cam.height);

  const bool inverted = scene.plant_height_class == HeightClass::kH3;
  const double amb = cfg.t_ambient;
  const double cf = sun.cloud_factor;
  const auto toward_ambient = [&](double t) { return amb + cf * (t - amb); };
  const double t_ground = toward_ambient(inverted ? cfg.t_ground_inverted : cfg.t_ground);
  const double t_plant = toward_ambient(inverted ? cfg.t_plant_inverted : cfg.t_plant);
  const double t_kerb = toward_ambient(cfg.t_kerb);
  const double t_sky = toward_ambient(amb + cfg.t_sky_offset);

  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  const Vec3 origin{pose.x + cam.forward_offset * c, pose.y + cam.forward_offset * s, cam.mount_height};

  Rng rng = substream(seed, Stream::kThermal, frame);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 rb = cam.ray_body(u, v);
      const Vec3 rw{rb.x * c - rb.y * s, rb.x * s + rb.y * c, rb.z};
      double t = t_sky;
      switch (trace_thermal_ray(origin, rw, scene, cfg.kerb_width, !inverted)) {
        case Hit::kSky: t = t_sky; break;
        case Hit::kGround: t = t_ground; break;
        case Hit::kKerb: t = t_kerb; break;
        case Hit::kPlant: t = t_plant; break;
      }
      const double n = noise(rng);
      img.at(u, v) = cfg.noise_sigma > 0.0 ? t + cfg.noise_sigma * n : t;
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Odometry

OdometryEstimate odometry_update(const OdometryEstimate& est, std::int64_t ticks_left, std::int64_t ticks_right,
                                 const RobotParams& p, double dt) {
  if (!(dt > 0.0)) throw InvalidParams("dt must be positive");
  const double q = p.tick_quantum_m();
  const double dl = static_cast<double>(ticks_left) * q;
  const double dr = static_cast<double>(ticks_right) * q;
  OdometryEstimate out;
  out.v = (dl + dr) / (2.0 * dt);
  out.omega = (dr - dl) / (p.effective_track() * dt);
  out.pose = integrate_pose(est.pose, {out.v, out.omega}, dt);
  return out;
}

// ---------------------------------------------------------------------------
// HT

HTReading ht_sample(const Ambient& env, double sigma_t, double sigma_h, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const double nt = noise(rng);
  const double nh = noise(rng);
  return {env.temperature + sigma_t * nt, std::clamp(env.humidity + sigma_h * nh, 0.0, 100.0)};
}

}  // namespace tiba
