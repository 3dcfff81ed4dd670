#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "camco/design.hpp"
#include "camco/scene.hpp"

namespace camco::testing {

inline Image ramp_image(int w, int h, double lo, double hi) {
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(x, y) = lo + (hi - lo) * (x + w * y) / static_cast<double>(w * h - 1);
  }
  return img;
}

inline bool near_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(b), 1e-300); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("camco_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace camco::testing
