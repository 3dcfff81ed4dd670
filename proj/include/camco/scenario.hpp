#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camco/formation.hpp"

namespace camco {

/// Physical calibration camera: brightness and noise were both fitted at
/// (anchor.exposure_ms, anchor.gain_db) with pixel pitch p0_um.
struct Calibration {
  DynamicParams anchor{5.0, 10.0};
  double p0_um = 3.75;
  NoiseModel noise{};
};

/// How episodes pick their illumination profile.
enum class IlluminationMode { Mixed, Day, Night, Sinusoidal, Abrupt };

std::string to_string(IlluminationMode m);
IlluminationMode illumination_mode_from_string(const std::string& s);

/// One evaluation condition: noise and blur multipliers on top of the
/// calibrated camera, plus the illumination regime and episode seed.
struct ScenarioConfig {
  std::string name = "calibrated";
  double noise_multiplier = 1.0;
  double blur_multiplier = 1.0;
  IlluminationMode illumination = IlluminationMode::Mixed;
  std::uint64_t episode_seed = 0;
  Calibration calibration{};

  /// Calibrated noise model with both coefficients scaled by noise_multiplier.
  [[nodiscard]] NoiseModel noise_model() const { return calibration.noise.scaled(noise_multiplier); }
  void validate() const;
};

/// Named presets: calibrated, noise-x10, noise-x20, blur-x2, blur-x4.
ScenarioConfig scenario_preset(const std::string& name);
const std::vector<std::string>& scenario_names();

}  // namespace camco
