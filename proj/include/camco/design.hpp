#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace camco {

/// One catalogue image sensor.
struct SensorSpec {
  double width_mm = 0.0;
  double height_mm = 0.0;
  double pixel_um = 0.0;
  int catalogue_index = -1;
  std::string name;

  [[nodiscard]] int pixels_wide() const;
  [[nodiscard]] int pixels_high() const;
  [[nodiscard]] std::array<double, 3> genes() const { return {width_mm, height_mm, pixel_um}; }
};

/// Read-only list of sensors with per-dimension (min, max) ranges used to
/// normalise the snapping distance.
class SensorCatalogue {
 public:
  SensorCatalogue() = default;
  explicit SensorCatalogue(std::vector<SensorSpec> entries);

  /// CSV with header `width_mm,height_mm,pixel_um,name`; blank lines and
  /// lines starting with '#' are skipped.
  static SensorCatalogue parse_csv(std::string_view text);
  static SensorCatalogue load_csv(const std::filesystem::path& path);
  /// The catalogue shipped with the project (compiled in).
  static const SensorCatalogue& builtin();

  [[nodiscard]] const std::vector<SensorSpec>& entries() const { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  [[nodiscard]] const SensorSpec& operator[](std::size_t i) const { return entries_[i]; }

  [[nodiscard]] double min(int dim) const { return lo_[dim]; }
  [[nodiscard]] double max(int dim) const { return hi_[dim]; }

  /// Entries passing `keep`, re-indexed from zero.
  [[nodiscard]] SensorCatalogue filtered(const std::function<bool(const SensorSpec&)>& keep) const;

  /// Entries whose native pixel counts are below max_w × max_h.
  [[nodiscard]] SensorCatalogue below_resolution(int max_w, int max_h) const;

  /// FNV-1a over the canonical serialisation; used in run manifests.
  [[nodiscard]] std::string hash() const;

 private:
  std::vector<SensorSpec> entries_;
  std::array<double, 3> lo_{};
  std::array<double, 3> hi_{};
};

/// Nearest catalogue entry in range-normalised (w, h, p) space; ties go to the
/// lowest catalogue index. Throws ConfigError on an empty catalogue.
const SensorSpec& snap_to_catalogue(std::span<const double, 3> genes, const SensorCatalogue& catalogue);

struct DesignBounds {
  double x_min = 0.0, x_max = 2.4;
  double z_min = 1.3, z_max = 1.7;
  double f_min = 1.0, f_max = 10.0;
};

/// Static camera hardware genome. The sensor is always the snap of the
/// continuous shadow genes.
struct CameraDesign {
  double x_m = 0.43;
  double z_m = 1.65;
  double focal_mm = 3.6;
  SensorSpec sensor;
  std::array<double, 3> raw_sensor_genes{};

  [[nodiscard]] double horizontal_fov_deg() const;
  [[nodiscard]] double vertical_fov_deg() const;
};

/// Clamps x, z, f to their intervals and the shadow sensor genes to the
/// catalogue's range, then re-snaps the sensor. Idempotent.
CameraDesign clamp_design(const CameraDesign& d, const SensorCatalogue& catalogue,
                          const DesignBounds& bounds = {});

/// p²/p0².
double pixel_area_ratio(const CameraDesign& design, double p0_um);

/// Genome layout used by the hardware GA: [x, z, f, w, h, p].
inline constexpr std::size_t kHardwareGenes = 6;
std::vector<double> design_to_genes(const CameraDesign& d);
CameraDesign design_from_genes(std::span<const double> genes, const SensorCatalogue& catalogue,
                               const DesignBounds& bounds = {});

/// Random design with every gene uniform in its feasible range.
CameraDesign random_design(std::uint64_t seed, const SensorCatalogue& catalogue,
                           const DesignBounds& bounds = {});

/// Fixed off-the-shelf cameras at the reference mounting (x 0.43 m, z 1.65 m, f 3.6 mm).
CameraDesign basler_design(const SensorCatalogue& catalogue);
CameraDesign flir_design(const SensorCatalogue& catalogue);

}  // namespace camco
