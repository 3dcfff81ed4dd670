#include "camco/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "camco/errors.hpp"
#include "camco/rng.hpp"

namespace camco {

// Defined in the generated catalogue_data.cpp.
extern const char* const kBuiltinCatalogueCsv;

int SensorSpec::pixels_wide() const {
  return static_cast<int>(std::lround(width_mm * 1000.0 / pixel_um));
}

int SensorSpec::pixels_high() const {
  return static_cast<int>(std::lround(height_mm * 1000.0 / pixel_um));
}

SensorCatalogue::SensorCatalogue(std::vector<SensorSpec> entries) : entries_(std::move(entries)) {
  lo_.fill(std::numeric_limits<double>::infinity());
  hi_.fill(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& e = entries_[i];
    if (!(e.width_mm > 0 && e.height_mm > 0 && e.pixel_um > 0)) {
      throw ConfigError("sensor catalogue entry " + std::to_string(i) + " has non-positive dimensions");
    }
    e.catalogue_index = static_cast<int>(i);
    const auto g = e.genes();
    for (int d = 0; d < 3; ++d) {
      lo_[d] = std::min(lo_[d], g[d]);
      hi_[d] = std::max(hi_[d], g[d]);
    }
  }
}

SensorCatalogue SensorCatalogue::parse_csv(std::string_view text) {
  std::vector<SensorSpec> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line.rfind("width_mm", 0) != 0) {
        throw ConfigError("sensor catalogue: expected header 'width_mm,height_mm,pixel_um,name'");
      }
      header_seen = true;
      continue;
    }
    std::istringstream fields(line);
    std::string w, h, p, name;
    if (!std::getline(fields, w, ',') || !std::getline(fields, h, ',') || !std::getline(fields, p, ',')) {
      throw ConfigError("sensor catalogue: malformed line " + std::to_string(line_no));
    }
    std::getline(fields, name);
    try {
      rows.push_back({std::stod(w), std::stod(h), std::stod(p), -1, name});
    } catch (const std::exception&) {
      throw ConfigError("sensor catalogue: non-numeric field on line " + std::to_string(line_no));
    }
  }
  if (rows.empty()) throw ConfigError("sensor catalogue is empty");
  return SensorCatalogue(std::move(rows));
}

SensorCatalogue SensorCatalogue::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sensor catalogue " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

const SensorCatalogue& SensorCatalogue::builtin() {
  static const SensorCatalogue cat = parse_csv(kBuiltinCatalogueCsv);
  return cat;
}

SensorCatalogue SensorCatalogue::filtered(const std::function<bool(const SensorSpec&)>& keep) const {
  std::vector<SensorSpec> kept;
  std::copy_if(entries_.begin(), entries_.end(), std::back_inserter(kept), keep);
  return SensorCatalogue(std::move(kept));
}

SensorCatalogue SensorCatalogue::below_resolution(int max_w, int max_h) const {
  return filtered([=](const SensorSpec& s) { return s.pixels_wide() < max_w && s.pixels_high() < max_h; });
}

std::string SensorCatalogue::hash() const {
  std::ostringstream canon;
  canon << std::setprecision(17);
  for (const auto& e : entries_) canon << e.width_mm << ',' << e.height_mm << ',' << e.pixel_um << ',' << e.name << '\n';
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

const SensorSpec& snap_to_catalogue(std::span<const double, 3> genes, const SensorCatalogue& catalogue) {
  if (catalogue.empty()) throw ConfigError("snap_to_catalogue: empty catalogue");
  std::array<double, 3> scale{};
  for (int d = 0; d < 3; ++d) {
    const double r = catalogue.max(d) - catalogue.min(d);
    scale[d] = r > 0.0 ? 1.0 / r : 1.0;
  }
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < catalogue.size(); ++i) {
    const auto g = catalogue[i].genes();
    double dist = 0.0;
    for (int d = 0; d < 3; ++d) {
      const double diff = (genes[d] - g[d]) * scale[d];
      dist += diff * diff;
    }
    if (dist < best_dist) {  // strict: earlier index wins ties
      best_dist = dist;
      best = i;
    }
  }
  return catalogue[best];
}

double CameraDesign::horizontal_fov_deg() const {
  return 2.0 * std::atan(sensor.width_mm / (2.0 * focal_mm)) * 180.0 / M_PI;
}

double CameraDesign::vertical_fov_deg() const {
  return 2.0 * std::atan(sensor.height_mm / (2.0 * focal_mm)) * 180.0 / M_PI;
}

CameraDesign clamp_design(const CameraDesign& d, const SensorCatalogue& catalogue, const DesignBounds& b) {
  CameraDesign out = d;
  out.x_m = std::clamp(d.x_m, b.x_min, b.x_max);
  out.z_m = std::clamp(d.z_m, b.z_min, b.z_max);
  out.focal_mm = std::clamp(d.focal_mm, b.f_min, b.f_max);
  for (int g = 0; g < 3; ++g) {
    out.raw_sensor_genes[g] = std::clamp(d.raw_sensor_genes[g], catalogue.min(g), catalogue.max(g));
  }
  out.sensor = snap_to_catalogue(out.raw_sensor_genes, catalogue);
  return out;
}

double pixel_area_ratio(const CameraDesign& design, double p0_um) {
  const double p = design.sensor.pixel_um;
  if (!(p > 0.0) || !(p0_um > 0.0)) throw DomainError("pixel_area_ratio: pixel sizes must be positive");
  return (p * p) / (p0_um * p0_um);
}

std::vector<double> design_to_genes(const CameraDesign& d) {
  return {d.x_m, d.z_m, d.focal_mm, d.raw_sensor_genes[0], d.raw_sensor_genes[1], d.raw_sensor_genes[2]};
}

CameraDesign design_from_genes(std::span<const double> genes, const SensorCatalogue& catalogue,
                               const DesignBounds& bounds) {
  if (genes.size() != kHardwareGenes) throw ShapeError("hardware genome must have 6 genes");
  CameraDesign d;
  d.x_m = genes[0];
  d.z_m = genes[1];
  d.focal_mm = genes[2];
  d.raw_sensor_genes = {genes[3], genes[4], genes[5]};
  return clamp_design(d, catalogue, bounds);
}

CameraDesign random_design(std::uint64_t seed, const SensorCatalogue& catalogue, const DesignBounds& b) {
  Rng rng(seed);
  CameraDesign d;
  d.x_m = uniform(rng, b.x_min, b.x_max);
  d.z_m = uniform(rng, b.z_min, b.z_max);
  d.focal_mm = uniform(rng, b.f_min, b.f_max);
  for (int g = 0; g < 3; ++g) d.raw_sensor_genes[g] = uniform(rng, catalogue.min(g), catalogue.max(g));
  return clamp_design(d, catalogue, b);
}

namespace {

CameraDesign fixed_design(const SensorCatalogue& catalogue, std::array<double, 3> sensor) {
  CameraDesign d;
  d.x_m = 0.43;
  d.z_m = 1.65;
  d.focal_mm = 3.6;
  d.raw_sensor_genes = sensor;
  return clamp_design(d, catalogue);
}

}  // namespace

CameraDesign basler_design(const SensorCatalogue& catalogue) { return fixed_design(catalogue, {4.8, 3.6, 3.75}); }

CameraDesign flir_design(const SensorCatalogue& catalogue) { return fixed_design(catalogue, {6.2, 4.65, 1.55}); }

}  // namespace camco
