#include "camco/scenario.hpp"

#include <cmath>

#include "camco/errors.hpp"

namespace camco {

std::string to_string(IlluminationMode m) {
  switch (m) {
    case IlluminationMode::Mixed: return "mixed";
    case IlluminationMode::Day: return "day";
    case IlluminationMode::Night: return "night";
    case IlluminationMode::Sinusoidal: return "sinusoidal";
    case IlluminationMode::Abrupt: return "abrupt";
  }
  return "mixed";
}

IlluminationMode illumination_mode_from_string(const std::string& s) {
  for (auto m : {IlluminationMode::Mixed, IlluminationMode::Day, IlluminationMode::Night,
                 IlluminationMode::Sinusoidal, IlluminationMode::Abrupt}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown illumination mode '" + s + "'");
}

void ScenarioConfig::validate() const {
  if (!(noise_multiplier >= 1.0) || !std::isfinite(noise_multiplier)) {
    throw ConfigError("scenario " + name + ": noise_multiplier must be >= 1");
  }
  if (!(blur_multiplier >= 1.0) || !std::isfinite(blur_multiplier)) {
    throw ConfigError("scenario " + name + ": blur_multiplier must be >= 1");
  }
  if (!(calibration.anchor.exposure_ms > 0.0) || !std::isfinite(calibration.anchor.gain_db)) {
    throw InvalidCalibration("scenario " + name + ": calibration anchor must be positive and finite");
  }
  if (!(calibration.p0_um > 0.0)) throw InvalidCalibration("scenario " + name + ": p0 must be positive");
  if (calibration.noise.sigma_p < 0.0 || calibration.noise.sigma_r < 0.0) {
    throw InvalidCalibration("scenario " + name + ": noise coefficients must be non-negative");
  }
}

ScenarioConfig scenario_preset(const std::string& name) {
  ScenarioConfig s;
  s.name = name;
  if (name == "calibrated") return s;
  if (name == "noise-x10") {
    s.noise_multiplier = 10.0;
  } else if (name == "noise-x20") {
    s.noise_multiplier = 20.0;
  } else if (name == "blur-x2") {
    s.blur_multiplier = 2.0;
  } else if (name == "blur-x4") {
    s.blur_multiplier = 4.0;
  } else {
    throw UsageError("unknown scenario '" + name + "'");
  }
  return s;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"calibrated", "noise-x10", "noise-x20", "blur-x2", "blur-x4"};
  return names;
}

}  // namespace camco
