#include "camco/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "camco/errors.hpp"
#include "camco/rng.hpp"

namespace camco {

namespace {

struct ShapeExtent {
  double width_m;
  double height_m;
  bool disc;
};

ShapeExtent shape_of(int class_id) {
  switch (static_cast<TargetClass>(class_id)) {
    case TargetClass::Vehicle: return {kClassSizes[0], 1.5, false};
    case TargetClass::Walker: return {0.6, kClassSizes[1], false};
    case TargetClass::Sign: return {kClassSizes[2], kClassSizes[2], true};
  }
  return {1.0, 1.0, false};
}

// Effective rendered pixel pitch in millimetres.
double effective_pitch_mm(const CameraDesign& d, int supersample) {
  return d.sensor.pixel_um * 1e-3 * supersample;
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

double illumination_at(const IlluminationProfile& p, int t) {
  const int tt = t + p.phase_frames;
  switch (p.kind) {
    case IlluminationKind::Constant: return p.phi_max;
    case IlluminationKind::Sinusoidal: {
      const double s = std::sin(2.0 * M_PI * tt / static_cast<double>(p.period_frames));
      return p.phi_min + (p.phi_max - p.phi_min) * (1.0 + s) / 2.0;
    }
    case IlluminationKind::AbruptStep: {
      const int half = std::max(1, p.period_frames / 2);
      return ((tt / half) % 2 == 0) ? p.phi_max : p.phi_min;
    }
  }
  return p.phi_max;
}

bool illumination_step_at(const IlluminationProfile& p, int t) {
  if (p.kind != IlluminationKind::AbruptStep || t <= 0) return false;
  return illumination_at(p, t) != illumination_at(p, t - 1);
}

double World::ego_speed_at(int t) const {
  // ego_phase is in frames of a 90-frame cycle
  const double s = std::sin(2.0 * M_PI * (t + ego_phase) / 90.0);
  return ego_speed_max * (1.0 + s) / 2.0;
}

World generate_world(const WorldConfig& cfg, std::uint64_t seed, int episode_index) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(episode_index), 0x5ce9eULL}));
  World w;
  w.seed = seed;
  w.episode_index = episode_index;
  w.ego_speed_max = cfg.v_max;
  w.ego_phase = uniform(rng, 0.0, static_cast<double>(cfg.ego_period));
  w.sky_reflectance = uniform(rng, 0.6, 0.8);
  w.road_reflectance = uniform(rng, 0.08, 0.16);

  const int n = uniform_int(rng, cfg.min_targets, cfg.max_targets);
  for (int i = 0; i < n; ++i) {
    Target tg;
    const double pick = uniform(rng, 0.0, 1.0);
    tg.class_id = pick < 0.45 ? 0 : (pick < 0.75 ? 1 : 2);
    // The first target is kept near the optical axis so every episode has
    // something a forward-facing camera can see.
    const double max_bearing = (i == 0 ? 25.0 : cfg.bearing_max_deg) * M_PI / 180.0;
    const double bearing = uniform(rng, -max_bearing, max_bearing);
    const double range = uniform(rng, cfg.range_min_m, cfg.range_max_m);
    const auto shape = shape_of(tg.class_id);
    // Targets are placed ahead of the vehicle's front (x = 2.5 m) so they lie
    // in front of every admissible mounting position.
    tg.position = {2.5 + range * std::cos(bearing), range * std::sin(bearing),
                   shape.disc ? 2.2 : shape.height_m / 2.0};
    tg.size = kClassSizes[tg.class_id];
    tg.reflectance = uniform(rng, cfg.target_reflectance_min, cfg.target_reflectance_max);
    if (static_cast<TargetClass>(tg.class_id) != TargetClass::Sign) {
      const double speed = uniform(rng, 0.0, cfg.v_max);
      tg.velocity = {0.0, uniform(rng, 0.0, 1.0) < 0.5 ? -speed : speed, 0.0};
    }
    w.targets.push_back(tg);
  }

  const double phi_max = cfg.phi_max;
  const double phi_min = cfg.phi_ratio * cfg.phi_max;
  IlluminationMode mode = cfg.illumination;
  if (mode == IlluminationMode::Mixed) {
    static constexpr IlluminationMode kModes[] = {IlluminationMode::Day, IlluminationMode::Night,
                                                  IlluminationMode::Sinusoidal, IlluminationMode::Abrupt};
    mode = kModes[uniform_int(rng, 0, 3)];
  }
  auto& prof = w.illumination;
  switch (mode) {
    case IlluminationMode::Day: prof = {IlluminationKind::Constant, phi_max, phi_max, 1, 0}; break;
    case IlluminationMode::Night: prof = {IlluminationKind::Constant, phi_min, phi_min, 1, 0}; break;
    case IlluminationMode::Sinusoidal:
      prof = {IlluminationKind::Sinusoidal, phi_min, phi_max, cfg.sinusoid_period,
              uniform_int(rng, 0, cfg.sinusoid_period - 1)};
      break;
    case IlluminationMode::Abrupt:
      prof = {IlluminationKind::AbruptStep, phi_min, phi_max, cfg.abrupt_period,
              uniform_int(rng, 0, cfg.abrupt_period - 1)};
      break;
    case IlluminationMode::Mixed: break;
  }
  return w;
}

Target target_at(const Target& target, int t, double frame_dt_s) {
  Target out = target;
  const double dt = t * frame_dt_s;
  out.position.x += target.velocity.x * dt;
  out.position.y += target.velocity.y * dt;
  out.position.z += target.velocity.z * dt;
  return out;
}

std::array<int, 2> image_dimensions(const CameraDesign& design, int supersample) {
  const int w = static_cast<int>(std::lround(static_cast<double>(design.sensor.pixels_wide()) / supersample));
  const int h = static_cast<int>(std::lround(static_cast<double>(design.sensor.pixels_high()) / supersample));
  if (w < 8 || h < 8) {
    throw InvalidDesign("rendered image would be " + std::to_string(w) + "x" + std::to_string(h) +
                        " pixels; at least 8x8 required");
  }
  return {w, h};
}

bool in_front_180(const CameraDesign& design, const Target& target) {
  return target.position.x - design.x_m > 0.0;
}

std::optional<ProjectedTarget> project(const CameraDesign& design, const Target& target, int supersample) {
  const double depth = target.position.x - design.x_m;
  if (!(depth > 0.0)) return std::nullopt;
  const auto [w, h] = image_dimensions(design, supersample);
  const double pitch = effective_pitch_mm(design, supersample);
  const double k = design.focal_mm / (depth * pitch);  // pixels per metre at this depth
  ProjectedTarget p;
  p.depth_m = depth;
  p.u = w / 2.0 + k * target.position.y;
  p.v = h / 2.0 - k * (target.position.z - design.z_m);
  if (p.u < 0.0 || p.u >= w || p.v < 0.0 || p.v >= h) return std::nullopt;
  const auto shape = shape_of(target.class_id);
  p.width_px = k * shape.width_m;
  p.height_px = k * shape.height_m;
  p.apparent_size_px = k * target.size;
  return p;
}

GroundTruth GroundTruth::empty_grid(int cols, int rows) {
  GroundTruth gt;
  gt.cols = cols;
  gt.rows = rows;
  gt.occupied.assign(static_cast<std::size_t>(cols * rows), 0);
  gt.cell_class.assign(static_cast<std::size_t>(cols * rows), -1);
  return gt;
}

namespace {

void draw_rect(Image& img, double x0, double y0, double x1, double y1, double value) {
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
  const int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
  const int ix1 = std::min(img.width - 1, static_cast<int>(std::ceil(x1)));
  const int iy1 = std::min(img.height - 1, static_cast<int>(std::ceil(y1)));
  for (int y = iy0; y <= iy1; ++y) {
    const double cy = overlap(y, y + 1.0, y0, y1);
    if (cy <= 0.0) continue;
    for (int x = ix0; x <= ix1; ++x) {
      const double c = cy * overlap(x, x + 1.0, x0, x1);
      if (c <= 0.0) continue;
      double& px = img.at(x, y);
      px = (1.0 - c) * px + c * value;
    }
  }
}

void draw_disc(Image& img, double cx, double cy, double radius, double value) {
  constexpr int kSub = 4;
  const int ix0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int iy0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int ix1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
  const int iy1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
  const double r2 = radius * radius;
  for (int y = iy0; y <= iy1; ++y) {
    for (int x = ix0; x <= ix1; ++x) {
      int inside = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = x + (sx + 0.5) / kSub - cx;
          const double py = y + (sy + 0.5) / kSub - cy;
          inside += (px * px + py * py <= r2);
        }
      }
      if (inside == 0) continue;
      const double c = static_cast<double>(inside) / (kSub * kSub);
      double& p = img.at(x, y);
      p = (1.0 - c) * p + c * value;
    }
  }
}

}  // namespace

FrameBundle render_base_frame(const World& world, const CameraDesign& design, int t, const WorldConfig& cfg) {
  const auto [w, h] = image_dimensions(design, cfg.supersample);
  FrameBundle fb;
  fb.t = t;
  fb.illumination_level = illumination_at(world.illumination, t);
  fb.illumination_step = illumination_step_at(world.illumination, t);

  // Reflectance 0.5 under full daylight maps to mid-range at the calibration anchor.
  const double gain = 255.0 * fb.illumination_level;
  fb.base = Image(w, h);
  const double horizon = h / 2.0;
  for (int y = 0; y < h; ++y) {
    const double sky_frac = std::clamp(horizon - y, 0.0, 1.0);
    const double below = std::max(0.0, (y + 0.5 - horizon) / (h - horizon));
    const double road = world.road_reflectance * (1.0 + 0.3 * below);
    const double value = gain * (sky_frac * world.sky_reflectance + (1.0 - sky_frac) * road);
    for (int x = 0; x < w; ++x) fb.base.at(x, y) = value;
  }

  struct Visible {
    Target target;
    ProjectedTarget proj;
  };
  std::vector<Visible> visible;
  for (const auto& tg0 : world.targets) {
    const Target tg = target_at(tg0, t, cfg.frame_dt_s);
    if (in_front_180(design, tg)) ++fb.in_fov_180_count;
    if (auto p = project(design, tg, cfg.supersample)) visible.push_back({tg, *p});
  }
  // Painter's order: far to near.
  std::stable_sort(visible.begin(), visible.end(),
                   [](const Visible& a, const Visible& b) { return a.proj.depth_m > b.proj.depth_m; });

  const double pitch = effective_pitch_mm(design, cfg.supersample);
  auto& gt = fb.ground_truth;
  gt = GroundTruth::empty_grid(cfg.grid_cols, cfg.grid_rows);
  std::vector<double> best_cover(static_cast<std::size_t>(gt.cells()), 0.0);
  const double cell_w = static_cast<double>(w) / gt.cols;
  const double cell_h = static_cast<double>(h) / gt.rows;

  for (const auto& [tg, p] : visible) {
    const double value = gain * tg.reflectance;
    const auto shape = shape_of(tg.class_id);
    if (shape.disc) {
      draw_disc(fb.base, p.u, p.v, p.width_px / 2.0, value);
    } else {
      draw_rect(fb.base, p.u - p.width_px / 2, p.v - p.height_px / 2, p.u + p.width_px / 2,
                p.v + p.height_px / 2, value);
    }

    GtObject obj;
    obj.class_id = tg.class_id;
    const int centre_cell = std::min(gt.rows - 1, static_cast<int>(p.v / cell_h)) * gt.cols +
                            std::min(gt.cols - 1, static_cast<int>(p.u / cell_w));
    for (int cy = 0; cy < gt.rows; ++cy) {
      const double oy = overlap(cy * cell_h, (cy + 1) * cell_h, p.v - p.height_px / 2, p.v + p.height_px / 2);
      if (oy <= 0.0) continue;
      for (int cx = 0; cx < gt.cols; ++cx) {
        const double ox = overlap(cx * cell_w, (cx + 1) * cell_w, p.u - p.width_px / 2, p.u + p.width_px / 2);
        const int cell = cy * gt.cols + cx;
        double cover = ox * oy / (cell_w * cell_h);
        if (cell == centre_cell) cover = std::max(cover, 1.0);
        if (cover < 0.25) continue;
        obj.cells.push_back(cell);
        gt.occupied[cell] = 1;
        if (cover >= best_cover[cell]) {  // nearer targets drawn later win ties
          best_cover[cell] = cover;
          gt.cell_class[cell] = tg.class_id;
        }
      }
    }
    if (std::find(obj.cells.begin(), obj.cells.end(), centre_cell) == obj.cells.end()) {
      obj.cells.push_back(centre_cell);
      gt.occupied[centre_cell] = 1;
      if (best_cover[centre_cell] <= 1.0) gt.cell_class[centre_cell] = tg.class_id;
    }
    std::sort(obj.cells.begin(), obj.cells.end());
    gt.objects.push_back(std::move(obj));

    const double speed_mps = std::hypot(tg.velocity.y, tg.velocity.z);
    fb.motion.target_speeds_px_per_ms.push_back(speed_mps * design.focal_mm / (p.depth_m * pitch) / 1000.0);
  }
  fb.motion.ego_speed_px_per_ms =
      world.ego_speed_at(t) * design.focal_mm / (cfg.ego_reference_depth_m * pitch) / 1000.0;
  fb.motion.direction_x = 1.0;
  fb.motion.direction_y = 0.0;
  return fb;
}

}  // namespace camco
