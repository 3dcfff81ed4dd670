#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "camco/design.hpp"
#include "camco/formation.hpp"
#include "camco/image.hpp"
#include "camco/scenario.hpp"

namespace camco {

enum class IlluminationKind { Constant, Sinusoidal, AbruptStep };

struct IlluminationProfile {
  IlluminationKind kind = IlluminationKind::Constant;
  double phi_min = 1.0;
  double phi_max = 1.0;
  int period_frames = 60;
  int phase_frames = 0;  ///< shifts t before evaluating the profile
};

/// Illumination level at frame t (t >= 0).
double illumination_at(const IlluminationProfile& profile, int t);

/// True when an abrupt-step profile switches level between t-1 and t.
bool illumination_step_at(const IlluminationProfile& profile, int t);

enum class TargetClass : int { Vehicle = 0, Walker = 1, Sign = 2 };
inline constexpr int kNumClasses = 3;
inline constexpr std::array<double, kNumClasses> kClassSizes{4.5, 1.7, 0.8};

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

/// World frame: x forward from the vehicle centre, y to the right, z up from the ground.
struct Target {
  int class_id = 0;
  Vec3 position;  ///< at episode frame 0
  double size = 1.0;
  double reflectance = 0.5;
  Vec3 velocity;  ///< m/s
};

struct World {
  std::uint64_t seed = 0;
  int episode_index = 0;
  std::vector<Target> targets;
  double ego_speed_max = 15.0;
  double ego_phase = 0.0;
  double sky_reflectance = 0.7;
  double road_reflectance = 0.12;
  IlluminationProfile illumination;

  /// Ego speed in m/s at frame t; sweeps continuously between 0 and ego_speed_max.
  [[nodiscard]] double ego_speed_at(int t) const;
};

/// Generator fixtures for the procedural driving world.
struct WorldConfig {
  int min_targets = 4;
  int max_targets = 10;
  double v_max = 15.0;  ///< m/s, for targets and ego
  double range_min_m = 6.0;
  double range_max_m = 50.0;
  double bearing_max_deg = 80.0;
  double frame_dt_s = 0.05;
  double phi_max = 1.0;
  double phi_ratio = 0.01;  ///< phi_min / phi_max
  int sinusoid_period = 60;
  int abrupt_period = 30;
  int ego_period = 90;
  double ego_reference_depth_m = 40.0;
  double target_reflectance_min = 0.05;
  double target_reflectance_max = 1.0;
  int supersample = 16;  ///< rendered pixels = native pixels / supersample
  int grid_cols = 16;
  int grid_rows = 12;
  IlluminationMode illumination = IlluminationMode::Mixed;
};

World generate_world(const WorldConfig& cfg, std::uint64_t seed, int episode_index);

/// Target pose at episode frame t.
Target target_at(const Target& target, int t, double frame_dt_s);

struct ProjectedTarget {
  double u = 0, v = 0;               ///< centre, pixels
  double width_px = 0, height_px = 0;  ///< extent of the drawn shape
  double apparent_size_px = 0;       ///< f·size/(Z·p_eff)
  double depth_m = 0;
};

/// Rendered image size for a design: native pixel counts divided by the
/// supersampling divisor. Throws InvalidDesign below 8×8.
std::array<int, 2> image_dimensions(const CameraDesign& design, int supersample = 16);

/// Pinhole projection onto the rendered image. Empty when the target is
/// behind the camera or its centre falls outside the image.
std::optional<ProjectedTarget> project(const CameraDesign& design, const Target& target, int supersample = 16);

/// Whether a target lies in the 180° half-space in front of the camera.
bool in_front_180(const CameraDesign& design, const Target& target);

struct GtObject {
  int class_id = 0;
  std::vector<int> cells;  ///< sorted row-major cell indices
};

/// Coarse occupancy ground truth on the detector grid.
struct GroundTruth {
  int cols = 16;
  int rows = 12;
  std::vector<std::uint8_t> occupied;  ///< rows·cols
  std::vector<int> cell_class;         ///< -1 where empty
  std::vector<GtObject> objects;

  [[nodiscard]] int cells() const { return cols * rows; }
  static GroundTruth empty_grid(int cols, int rows);
};

struct FrameBundle {
  int t = 0;
  Image base;  ///< calibrated at the anchor exposure/gain and reference pixel size
  GroundTruth ground_truth;
  MotionField motion;
  double illumination_level = 1.0;
  int in_fov_180_count = 0;
  bool illumination_step = false;
};

/// Renders the world at frame t as seen by `design`.
FrameBundle render_base_frame(const World& world, const CameraDesign& design, int t,
                              const WorldConfig& cfg = {});

}  // namespace camco
