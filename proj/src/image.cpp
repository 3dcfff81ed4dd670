#include "camco/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace camco {

Image::Image(int w, int h, double fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

double Image::sum() const { return std::accumulate(pixels.begin(), pixels.end(), 0.0); }

double Image::mean() const { return pixels.empty() ? 0.0 : sum() / static_cast<double>(size()); }

double Image::max() const {
  return pixels.empty() ? 0.0 : *std::max_element(pixels.begin(), pixels.end());
}

void write_pgm(const Image& img, const std::filesystem::path& path, int white_level) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  const double scale = 255.0 / static_cast<double>(white_level);
  std::vector<unsigned char> bytes(img.size());
  std::transform(img.pixels.begin(), img.pixels.end(), bytes.begin(), [scale](double v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v * scale), 0L, 255L));
  });
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace camco
