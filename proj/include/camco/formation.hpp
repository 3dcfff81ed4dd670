#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "camco/image.hpp"

namespace camco {

// Dynamic-parameter bounds for controller outputs.
inline constexpr double kExposureMinMs = 0.1;
inline constexpr double kExposureMaxMs = 50.0;
inline constexpr double kGainMinDb = 1.0;
inline constexpr double kGainMaxDb = 30.0;
inline constexpr double kExposureRangeMs = kExposureMaxMs - kExposureMinMs;
inline constexpr double kGainRangeDb = kGainMaxDb - kGainMinDb;

/// Analog gain uses the voltage convention: 20 dB per decade.
inline double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }
inline double linear_to_db(double lin) { return 20.0 * std::log10(lin); }

/// Exposure time and gain for one frame. Gain is stored in dB; every
/// formation equation consumes the linear value.
struct DynamicParams {
  double exposure_ms = 5.0;
  double gain_db = 10.0;

  [[nodiscard]] double gain_linear() const { return db_to_linear(gain_db); }

  /// Clamped to the controller bounds.
  [[nodiscard]] DynamicParams clamped() const;
  [[nodiscard]] bool in_bounds() const;

  static DynamicParams from_linear_gain(double exposure_ms, double gain_linear) {
    return {exposure_ms, linear_to_db(gain_linear)};
  }

  friend bool operator==(const DynamicParams&, const DynamicParams&) = default;
};

/// Calibrated affine (photon + thermal) noise model. The calibration anchor
/// (e0_ms, g0_linear) is the physical camera setting the noise was fitted at.
struct NoiseModel {
  double sigma_p = 0.3;
  double sigma_r = 0.6;
  double e0_ms = 5.0;
  double g0_linear = db_to_linear(10.0);
  int white_level = 255;

  /// Both coefficients multiplied by k (the Noise×k scenarios).
  [[nodiscard]] NoiseModel scaled(double k) const;
};

/// Image-plane motion in pixels per millisecond. Blur is applied as a single
/// kernel, so the field reduces to one dominant speed along `direction`.
struct MotionField {
  std::vector<double> target_speeds_px_per_ms;
  double ego_speed_px_per_ms = 0.0;
  double direction_x = 1.0;
  double direction_y = 0.0;

  /// Ego component plus the mean of the per-target speeds.
  [[nodiscard]] double dominant_speed() const;
};

/// Product (E_t/E_0)·(G_t/G_0)·area_ratio; throws InvalidCalibration when the
/// calibration anchor is not strictly positive.
double intensity_scale_factor(const DynamicParams& calib, const DynamicParams& current,
                              double pixel_area_ratio);

Image scale_intensity(const Image& base, const DynamicParams& calib, const DynamicParams& current,
                      double pixel_area_ratio);

/// Generalised per-pixel variance (G_t/G_0)·σp²·I + (G_t/G_0)²·σr².
double noise_variance(const NoiseModel& model, double intensity, double gain_linear);

/// Unit-variance Gaussian field, one sample per pixel, fixed by the seed.
std::vector<double> standard_normal_field(std::size_t count, std::uint64_t seed);

/// Adds zero-mean Gaussian noise with noise_variance() per pixel. Negative
/// input intensities raise DomainError.
Image add_noise(const Image& img, const NoiseModel& model, double gain_linear, std::uint64_t seed);

/// max(1, round(speed·E·multiplier)); 1 means no blur.
int blur_kernel_length(const MotionField& motion, double exposure_ms, double blur_multiplier);

/// Normalised 1-D box filter of `length` taps along a unit direction with
/// replicate-edge borders. Axis-aligned directions use integer taps; other
/// directions sample bilinearly.
Image apply_motion_blur(const Image& img, int length, double direction_x = 1.0,
                        double direction_y = 0.0);

/// Elementwise clamp into [0, white_level].
Image clip_white(const Image& img, int white_level);

}  // namespace camco
