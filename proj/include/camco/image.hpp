#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace camco {

/// Single-channel linear-intensity image stored row-major in sensor counts.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, double fill = 0.0);

  [[nodiscard]] std::size_t size() const { return pixels.size(); }
  [[nodiscard]] bool empty() const { return pixels.empty(); }

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  [[nodiscard]] double at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }

  [[nodiscard]] std::span<const double> row(int y) const {
    return {pixels.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
  }

  [[nodiscard]] double mean() const;
  [[nodiscard]] double sum() const;
  [[nodiscard]] double max() const;
  [[nodiscard]] bool same_shape(const Image& other) const {
    return width == other.width && height == other.height;
  }
};

/// Writes an 8-bit binary PGM, quantising by rounding and saturating at white_level.
void write_pgm(const Image& img, const std::filesystem::path& path, int white_level = 255);

}  // namespace camco
