#include "tiba/nav.hpp"

#include <algorithm>
#include <cmath>

#include "tiba/error.hpp"

namespace tiba {
namespace {

struct Line2 {
  Vec2 centroid;
  double angle = 0.0;  // direction, oriented toward +x
  std::size_t used = 0;
  std::size_t inliers = 0;
};

// Least-squares u = a + b·v.
struct LinearFit {
  double a = 0.0;
  double b = 0.0;
  double at(double v) const { return a + b * v; }
};

LinearFit fit_linear(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double b = sxx > 0.0 ? sxy / sxx : 0.0;
  return {my - b * mx, b};
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

Line2 tls_fit(std::span<const Vec2> pts) {
  Vec2 c{};
  for (const auto& p : pts) c = c + p;
  c = (1.0 / static_cast<double>(pts.size())) * c;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    const Vec2 d = p - c;
    sxx += d.x * d.x;
    syy += d.y * d.y;
    sxy += d.x * d.y;
  }
  double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  if (std::cos(angle) < 0.0) angle = normalize_angle(angle + std::numbers::pi);
  return {c, angle, pts.size(), pts.size()};
}

Line2 robust_line(std::span<const Vec2> pts, double outlier_factor) {
  Line2 first = tls_fit(pts);
  const Vec2 n{-std::sin(first.angle), std::cos(first.angle)};
  std::vector<double> res;
  res.reserve(pts.size());
  for (const auto& p : pts) res.push_back(std::abs(dot(p - first.centroid, n)));
  const double cutoff = std::max(outlier_factor * median(res), 0.05);
  std::vector<Vec2> kept;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (res[i] <= cutoff) kept.push_back(pts[i]);
  }
  if (kept.size() < 2 || kept.size() == pts.size()) return first;
  Line2 refit = tls_fit(kept);
  refit.used = pts.size();
  refit.inliers = kept.size();
  return refit;
}

}  // namespace

Band select_band(const ThermalImage& img) {
  const int w = img.width;
  const int h = img.height;
  double center = 0.0, sides = 0.0;
  std::size_t nc = 0, ns = 0;
  for (int v = 3 * h / 4; v < h; ++v) {
    for (int u = w / 3; u < 2 * w / 3; ++u, ++nc) center += img.at(u, v);
  }
  for (int v = h / 2; v < h; ++v) {
    for (int u = 0; u < w / 6; ++u, ++ns) sides += img.at(u, v);
    for (int u = w - w / 6; u < w; ++u, ++ns) sides += img.at(u, v);
  }
  if (nc == 0 || ns == 0) return Band::kWarm;
  return center / static_cast<double>(nc) < sides / static_cast<double>(ns) ? Band::kCold : Band::kWarm;
}

std::vector<bool> band_mask(const ThermalImage& img, Band band, const ThermalCenterlineConfig& cfg) {
  const double lo = band == Band::kWarm ? cfg.warm_min : cfg.cold_min;
  const double hi = band == Band::kWarm ? cfg.warm_max : cfg.cold_max;
  std::vector<bool> mask(img.temps.size());
  for (std::size_t i = 0; i < img.temps.size(); ++i) mask[i] = img.temps[i] >= lo && img.temps[i] <= hi;
  return mask;
}

CorridorEstimate thermal_centerline(const ThermalImage& img, const ThermalCenterlineConfig& cfg) {
  if (img.width <= 0 || img.height <= 0 || img.temps.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw InvalidParams("malformed thermal image");
  }
  return thermal_centerline_mask(band_mask(img, select_band(img), cfg), img.width, img.height, cfg);
}

CorridorEstimate thermal_centerline_mask(const std::vector<bool>& mask, int width, int height,
                                         const ThermalCenterlineConfig& cfg) {
  ThermalCamera cam = cfg.camera;
  cam.width = width;
  cam.height = height;

  struct Row {
    double v, left, right, width_m;
  };
  std::vector<Row> rows;
  std::size_t candidates = 0;

  for (int v = 0; v < height; ++v) {
    const auto center = cam.ground_point(cam.cx(), v);
    if (!center || center->x < cfg.min_ground_range || center->x > cfg.max_ground_range) continue;
    ++candidates;
    const auto base = static_cast<std::size_t>(v) * width;
    int left = -1, right = -1;
    for (int u = 0; u < width; ++u) {
      if (mask[base + u]) {
        if (left < 0) left = u;
        right = u;
      }
    }
    // A margin touching the image border is not a margin.
    if (left <= 0 || right >= width - 1) continue;
    const auto gl = cam.ground_point(left, v);
    const auto gr = cam.ground_point(right, v);
    rows.push_back({static_cast<double>(v), static_cast<double>(left), static_cast<double>(right),
                    std::abs(gl->y - gr->y)});
  }
  if (rows.empty() || static_cast<int>(rows.size()) < cfg.min_rows) throw NoPath("too few rows with both margins");

  std::vector<double> widths;
  for (const auto& r : rows) widths.push_back(r.width_m);
  const double med = median(widths);
  std::erase_if(rows, [&](const Row& r) { return std::abs(r.width_m - med) > cfg.width_tolerance * med; });
  if (static_cast<int>(rows.size()) < cfg.min_rows) throw NoPath("too few consistent rows");

  std::vector<double> vs, ls, rs;
  for (const auto& r : rows) {
    vs.push_back(r.v);
    ls.push_back(r.left);
    rs.push_back(r.right);
  }
  const LinearFit lf = fit_linear(vs, ls);
  const LinearFit rf = fit_linear(vs, rs);
  const auto center_u = [&](double v) { return 0.5 * (lf.at(v) + rf.at(v)); };

  const double v_near = *std::max_element(vs.begin(), vs.end());
  const double v_far = *std::min_element(vs.begin(), vs.end());
  const auto p_near = cam.ground_point(center_u(v_near), v_near);
  const auto p_far = cam.ground_point(center_u(v_far), v_far);
  if (!p_near || !p_far || v_near == v_far) throw NoPath("degenerate centerline");

  const double psi = std::atan2(p_far->y - p_near->y, p_far->x - p_near->x);
  CorridorEstimate est;
  est.lateral_offset = p_near->x * std::sin(psi) - p_near->y * std::cos(psi);
  est.heading_error = -psi;
  est.confidence = std::clamp(static_cast<double>(rows.size()) / static_cast<double>(candidates), 0.0, 1.0);
  return est;
}

CorridorEstimate lidar_corridor(const LidarScan& scan, const LidarCorridorConfig& cfg) {
  if (scan.ranges.size() != static_cast<std::size_t>(scan.n_beams)) throw InvalidParams("malformed scan");
  std::vector<Vec2> hits;
  for (int i = 0; i < scan.n_beams; ++i) {
    const double r = scan.ranges[static_cast<std::size_t>(i)];
    if (r >= scan.max_range) continue;
    const double a = scan.beam_angle(i);
    hits.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return lidar_corridor_points(hits, cfg);
}

CorridorEstimate lidar_corridor_points(std::span<const Vec2> hits, const LidarCorridorConfig& cfg) {
  std::vector<Vec2> left, right;
  for (const auto& p : hits) {
    const double r = norm(p);
    if (p.x <= 0.0 || r < cfg.min_range || r > cfg.max_fit_range) continue;
    (p.y > 0.0 ? left : right).push_back(p);
  }
  const bool has_left = static_cast<int>(left.size()) >= cfg.min_points;
  const bool has_right = static_cast<int>(right.size()) >= cfg.min_points;
  if (!has_left && !has_right) throw NoCorridor("not enough returns on either side");

  const double half = cfg.nominal_row_spacing / 2.0;
  CorridorEstimate est;
  if (has_left && has_right) {
    const Line2 l = robust_line(left, cfg.outlier_factor);
    const Line2 r = robust_line(right, cfg.outlier_factor);
    const double psi = std::atan2(std::sin(l.angle) + std::sin(r.angle), std::cos(l.angle) + std::cos(r.angle));
    const Vec2 n{-std::sin(psi), std::cos(psi)};
    est.lateral_offset = -0.5 * (dot(n, l.centroid) + dot(n, r.centroid));
    est.heading_error = -psi;
    est.confidence = static_cast<double>(l.inliers + r.inliers) / static_cast<double>(l.used + r.used);
  } else {
    const bool is_left = has_left;
    const Line2 line = robust_line(is_left ? left : right, cfg.outlier_factor);
    const Vec2 n{-std::sin(line.angle), std::cos(line.angle)};
    const double row = dot(n, line.centroid);
    const double center = is_left ? row - half : row + half;
    est.lateral_offset = -center;
    est.heading_error = -line.angle;
    est.confidence =
        cfg.one_sided_penalty * static_cast<double>(line.inliers) / static_cast<double>(line.used);
  }
  return est;
}

Twist corridor_steer(const CorridorEstimate& est, const SteerGains& gains, double v_ref) {
  if (!(est.confidence > 0.0)) return {};
  const double raw = -gains.k_y * est.lateral_offset - gains.k_theta * est.heading_error;
  const double omega = std::clamp(raw, -gains.omega_max, gains.omega_max);
  const double scale = std::max(0.0, 1.0 - std::abs(omega) / gains.omega_max);
  return {std::max(0.0, v_ref * scale * std::min(est.confidence, 1.0)), omega};
}

double sun_heading(const SolarAngles& angles, const SunState& sun, double elevation_max) {
  if (sun.elevation >= elevation_max) throw IllConditioned("sun too close to zenith for a heading fix");
  const double body_azimuth = std::atan2(std::tan(angles.alpha_y), std::tan(angles.alpha_x));
  return normalize_angle(sun.azimuth - body_azimuth);
}

std::optional<Twist> waypoint_steer(const Pose2D& pose, std::span<const Vec2> path, const WaypointConfig& cfg,
                                    std::size_t* progress) {
  if (path.empty()) throw InvalidParams("empty path");
  const Vec2 here{pose.x, pose.y};
  if (norm(path.back() - here) <= cfg.arrival_radius) return std::nullopt;

  std::size_t start = progress ? std::min(*progress, path.size() - 1) : 0;
  // Advance to the closest point from the last progress mark.
  std::size_t closest = start;
  double best = norm(path[start] - here);
  for (std::size_t i = start + 1; i < path.size(); ++i) {
    const double d = norm(path[i] - here);
    if (d < best) {
      best = d;
      closest = i;
    }
  }
  if (progress) *progress = closest;

  // First point at least one lookahead away that is not behind the robot.
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  Vec2 target = path.back();
  for (std::size_t i = closest; i < path.size(); ++i) {
    const Vec2 d = path[i] - here;
    if (norm(d) >= cfg.lookahead && c * d.x + s * d.y > 0.0) {
      target = path[i];
      break;
    }
  }
  const Vec2 d = target - here;
  const double y_body = -s * d.x + c * d.y;
  const double curvature = 2.0 * y_body / (cfg.lookahead * cfg.lookahead);
  return Twist{cfg.v_ref, std::clamp(cfg.v_ref * curvature, -cfg.omega_max, cfg.omega_max)};
}

std::vector<Vec2> densify_path(std::span<const Vec2> path, double spacing) {
  std::vector<Vec2> out;
  if (path.empty()) return out;
  out.push_back(path.front());
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Vec2 a = path[i - 1];
    const Vec2 b = path[i];
    const double len = norm(b - a);
    const auto n = static_cast<int>(std::ceil(len / spacing));
    for (int k = 1; k <= n; ++k) out.push_back(a + (static_cast<double>(k) / n) * (b - a));
  }
  return out;
}

}  // namespace tiba
