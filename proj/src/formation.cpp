#include "camco/formation.hpp"

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <numeric>
#include <string>

#include "camco/errors.hpp"
#include "camco/rng.hpp"

namespace camco {

DynamicParams DynamicParams::clamped() const {
  return {std::clamp(exposure_ms, kExposureMinMs, kExposureMaxMs),
          std::clamp(gain_db, kGainMinDb, kGainMaxDb)};
}

bool DynamicParams::in_bounds() const {
  return exposure_ms >= kExposureMinMs && exposure_ms <= kExposureMaxMs && gain_db >= kGainMinDb &&
         gain_db <= kGainMaxDb;
}

NoiseModel NoiseModel::scaled(double k) const {
  NoiseModel m = *this;
  m.sigma_p *= k;
  m.sigma_r *= k;
  return m;
}

double MotionField::dominant_speed() const {
  double mean_target = 0.0;
  if (!target_speeds_px_per_ms.empty()) {
    mean_target = std::accumulate(target_speeds_px_per_ms.begin(), target_speeds_px_per_ms.end(), 0.0) /
                  static_cast<double>(target_speeds_px_per_ms.size());
  }
  return ego_speed_px_per_ms + mean_target;
}

double intensity_scale_factor(const DynamicParams& calib, const DynamicParams& current,
                              double pixel_area_ratio) {
  if (!(calib.exposure_ms > 0.0) || !std::isfinite(calib.gain_db)) {
    throw InvalidCalibration("calibration exposure must be strictly positive");
  }
  const double g0 = calib.gain_linear();
  if (!(g0 > 0.0)) throw InvalidCalibration("calibration gain must be strictly positive");
  if (!(pixel_area_ratio > 0.0)) throw InvalidCalibration("pixel area ratio must be positive");
  return (current.exposure_ms / calib.exposure_ms) * (current.gain_linear() / g0) * pixel_area_ratio;
}

Image scale_intensity(const Image& base, const DynamicParams& calib, const DynamicParams& current,
                      double pixel_area_ratio) {
  const double s = intensity_scale_factor(calib, current, pixel_area_ratio);
  Image out = base;
  for (double& v : out.pixels) v *= s;
  return out;
}

double noise_variance(const NoiseModel& model, double intensity, double gain_linear) {
  if (intensity < 0.0) throw DomainError("noise_variance: negative intensity");
  if (!(gain_linear > 0.0)) throw DomainError("noise_variance: gain must be positive");
  const double rel = gain_linear / model.g0_linear;
  return rel * model.sigma_p * model.sigma_p * intensity + rel * rel * model.sigma_r * model.sigma_r;
}

std::vector<double> standard_normal_field(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(count);
  for (double& v : z) v = normal(rng);
  return z;
}

Image add_noise(const Image& img, const NoiseModel& model, double gain_linear, std::uint64_t seed) {
  if (!(gain_linear > 0.0)) throw DomainError("add_noise: gain must be positive");
  const double rel = gain_linear / model.g0_linear;
  const double photon = rel * model.sigma_p * model.sigma_p;
  const double thermal = rel * rel * model.sigma_r * model.sigma_r;
  if (photon == 0.0 && thermal == 0.0) return img;

  const auto z = standard_normal_field(img.size(), seed);
  Image out = img;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out.pixels[i];
    if (v < 0.0) throw DomainError("add_noise: negative intensity at pixel " + std::to_string(i));
    out.pixels[i] = v + std::sqrt(photon * v + thermal) * z[i];
  }
  return out;
}

int blur_kernel_length(const MotionField& motion, double exposure_ms, double blur_multiplier) {
  const double extent = motion.dominant_speed() * exposure_ms * blur_multiplier;
  return std::max(1, static_cast<int>(std::lround(extent)));
}

namespace {

// Box filter along x with replicate edges, via a prefix sum over the padded row.
void blur_rows(const Image& in, Image& out, int length) {
  const int lo = -(length - 1) / 2;
  const int hi = lo + length - 1;
  const int w = in.width;
  std::vector<double> prefix(static_cast<std::size_t>(w - lo + hi + 1), 0.0);
  const double inv = 1.0 / length;
  for (int y = 0; y < in.height; ++y) {
    const auto row = in.row(y);
    // prefix[j+1] = sum of padded[0..j], padded[j] = row[clamp(j + lo)]
    for (int j = 0; j < w - lo + hi; ++j) {
      const int src = std::clamp(j + lo, 0, w - 1);
      prefix[j + 1] = prefix[j] + row[src];
    }
    for (int x = 0; x < w; ++x) out.at(x, y) = (prefix[x + length] - prefix[x]) * inv;
  }
}

void blur_cols(const Image& in, Image& out, int length) {
  const int lo = -(length - 1) / 2;
  const double inv = 1.0 / length;
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) out.at(x, y) = 0.0;
    for (int k = 0; k < length; ++k) {
      const int src = std::clamp(y + lo + k, 0, in.height - 1);
      for (int x = 0; x < in.width; ++x) out.at(x, y) += in.at(x, src);
    }
    for (int x = 0; x < in.width; ++x) out.at(x, y) *= inv;
  }
}

double sample_bilinear(const Image& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  return (1 - fx) * (1 - fy) * img.at(x0, y0) + fx * (1 - fy) * img.at(x1, y0) +
         (1 - fx) * fy * img.at(x0, y1) + fx * fy * img.at(x1, y1);
}

}  // namespace

Image apply_motion_blur(const Image& img, int length, double direction_x, double direction_y) {
  if (length < 1) throw DomainError("apply_motion_blur: kernel length must be >= 1");
  if (length == 1 || img.empty()) return img;

  const double norm = std::hypot(direction_x, direction_y);
  if (!(norm > 0.0)) throw DomainError("apply_motion_blur: zero direction");
  const double dx = direction_x / norm;
  const double dy = direction_y / norm;

  Image out(img.width, img.height);
  constexpr double eps = 1e-12;
  if (std::abs(dy) < eps) {
    blur_rows(img, out, length);
    return out;
  }
  if (std::abs(dx) < eps) {
    blur_cols(img, out, length);
    return out;
  }
  const int lo = -(length - 1) / 2;
  const double inv = 1.0 / length;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int k = 0; k < length; ++k) {
        const double t = lo + k;
        acc += sample_bilinear(img, x + t * dx, y + t * dy);
      }
      out.at(x, y) = acc * inv;
    }
  }
  return out;
}

Image clip_white(const Image& img, int white_level) {
  Image out = img;
  const double white = white_level;
  for (double& v : out.pixels) v = std::clamp(v, 0.0, white);
  return out;
}

}  // namespace camco
