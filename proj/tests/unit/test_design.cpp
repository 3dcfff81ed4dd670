#include <array>
#include <cmath>
#include <limits>

#include "camco/design.hpp"
#include "camco/errors.hpp"
#include "camco/rng.hpp"
#include "doctest.h"

using namespace camco;

namespace {

// Independent nearest-neighbour oracle: per-dimension min/max recomputed
// here, plain loop, strict '<' keeps the lowest index on ties.
std::size_t brute_nearest(const std::array<double, 3>& g, const SensorCatalogue& cat) {
  std::array<double, 3> lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const auto& e : cat.entries()) {
    const std::array<double, 3> v{e.width_mm, e.height_mm, e.pixel_um};
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], v[d]);
      hi[d] = std::max(hi[d], v[d]);
    }
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cat.size(); ++i) {
    const std::array<double, 3> v{cat[i].width_mm, cat[i].height_mm, cat[i].pixel_um};
    double d2 = 0.0;
    for (int d = 0; d < 3; ++d) {
      const double span = hi[d] > lo[d] ? hi[d] - lo[d] : 1.0;
      const double t = (g[d] - v[d]) / span;
      d2 += t * t;
    }
    if (d2 < best_d) {
      best_d = d2;
      best = i;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("builtin catalogue") {
  const auto& cat = SensorCatalogue::builtin();
  CHECK(cat.size() == 43);
  for (const auto& e : cat.entries()) {
    CHECK(e.width_mm > 0.0);
    CHECK(e.pixel_um > 0.0);
    CHECK(e.pixels_wide() >= 64);
    CHECK(e.pixels_high() >= 64);
  }
  CHECK(cat.hash() != SensorCatalogue::parse_csv("width_mm,height_mm,pixel_um,name\n4.8,3.6,3.75,a\n").hash());
}

TEST_CASE("catalogue parsing") {
  const auto cat = SensorCatalogue::parse_csv(
      "width_mm,height_mm,pixel_um,name\n# comment\n\n4.8,3.6,3.75,basler-like\n6.2,4.65,1.55,flir-like\n");
  REQUIRE(cat.size() == 2);
  CHECK(cat[1].name == "flir-like");
  CHECK(cat[1].catalogue_index == 1);
  CHECK_THROWS_AS(SensorCatalogue::parse_csv("width_mm,height_mm,pixel_um,name\n4.8,x,3.75,bad\n"), ConfigError);
  CHECK_THROWS_AS(SensorCatalogue::parse_csv("width_mm,height_mm,pixel_um,name\n-4.8,3.6,3.75,neg\n"), ConfigError);
}

TEST_CASE("snap_to_catalogue") {
  const auto two = SensorCatalogue::parse_csv("width_mm,height_mm,pixel_um,name\n4.8,3.6,3.75,a\n6.2,4.65,1.55,b\n");

  SUBCASE("exact entry") {
    const std::array<double, 3> g{6.2, 4.65, 1.55};
    CHECK(snap_to_catalogue(g, two).name == "b");
  }
  SUBCASE("nearest in normalised space") {
    const std::array<double, 3> g{5.0, 3.7, 3.5};
    CHECK(snap_to_catalogue(g, two).name == "a");
  }
  SUBCASE("outside the hull still snaps") {
    const std::array<double, 3> g{100.0, -5.0, 40.0};
    CHECK_NOTHROW(snap_to_catalogue(g, two));
  }
  SUBCASE("ties go to the lowest index") {
    const auto dup = SensorCatalogue::parse_csv("width_mm,height_mm,pixel_um,name\n4,3,2,first\n4,3,2,second\n6,5,4,x\n");
    const std::array<double, 3> g{4.0, 3.0, 2.0};
    CHECK(snap_to_catalogue(g, dup).name == "first");
  }
  SUBCASE("empty catalogue") {
    const std::array<double, 3> g{1, 1, 1};
    CHECK_THROWS_AS(snap_to_catalogue(g, SensorCatalogue{}), ConfigError);
  }
  SUBCASE("idempotent on every builtin entry") {
    const auto& cat = SensorCatalogue::builtin();
    for (const auto& e : cat.entries()) {
      const auto g = e.genes();
      CHECK(snap_to_catalogue(g, cat).genes() == g);
    }
  }
  SUBCASE("agrees with the brute-force oracle") {
    const auto& cat = SensorCatalogue::builtin();
    Rng rng(4242);
    int agree = 0;
    for (int q = 0; q < 1000; ++q) {
      const std::array<double, 3> g{uniform(rng, cat.min(0) - 1, cat.max(0) + 1),
                                    uniform(rng, cat.min(1) - 1, cat.max(1) + 1),
                                    uniform(rng, cat.min(2) - 0.5, cat.max(2) + 0.5)};
      agree += snap_to_catalogue(g, cat).catalogue_index == static_cast<int>(brute_nearest(g, cat));
    }
    CHECK(agree == 1000);
  }
}

TEST_CASE("clamp_design") {
  const auto& cat = SensorCatalogue::builtin();
  auto d = basler_design(cat);
  SUBCASE("in bounds is unchanged") {
    const auto c = clamp_design(d, cat);
    CHECK(c.x_m == d.x_m);
    CHECK(c.focal_mm == d.focal_mm);
    CHECK(c.sensor.catalogue_index == d.sensor.catalogue_index);
  }
  SUBCASE("out of bounds fields are pulled in") {
    d.x_m = 3.1;
    d.focal_mm = 0.2;
    d.z_m = 0.0;
    const auto c = clamp_design(d, cat);
    CHECK(c.x_m == 2.4);
    CHECK(c.focal_mm == 1.0);
    CHECK(c.z_m == 1.3);
    const auto cc = clamp_design(c, cat);
    CHECK(cc.x_m == c.x_m);
    CHECK(cc.raw_sensor_genes == c.raw_sensor_genes);
  }
}

TEST_CASE("pixel_area_ratio and FoV") {
  const auto& cat = SensorCatalogue::builtin();
  auto d = basler_design(cat);
  CHECK(d.sensor.pixel_um == doctest::Approx(3.75));
  CHECK(pixel_area_ratio(d, 3.75) == doctest::Approx(1.0));
  CHECK(pixel_area_ratio(d, 3.75 / 2.0) == doctest::Approx(4.0));

  const auto flir = flir_design(cat);
  CHECK(flir.sensor.width_mm == doctest::Approx(6.2));
  CHECK(flir.sensor.pixel_um == doctest::Approx(1.55));
  CHECK(flir.horizontal_fov_deg() == doctest::Approx(81.46).epsilon(1e-3));
}

TEST_CASE("genome round trip") {
  const auto& cat = SensorCatalogue::builtin();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto d = random_design(s, cat);
    const auto g = design_to_genes(d);
    REQUIRE(g.size() == kHardwareGenes);
    const auto back = design_from_genes(g, cat);
    CHECK(back.x_m == d.x_m);
    CHECK(back.focal_mm == d.focal_mm);
    CHECK(back.sensor.catalogue_index == d.sensor.catalogue_index);
    CHECK(back.x_m >= 0.0);
    CHECK(back.x_m <= 2.4);
    CHECK(back.z_m >= 1.3);
    CHECK(back.z_m <= 1.7);
  }
}

TEST_CASE("resolution filter") {
  const auto& cat = SensorCatalogue::builtin();
  const auto small = cat.below_resolution(1920, 1280);
  CHECK(small.size() < cat.size());
  for (const auto& e : small.entries()) {
    CHECK(e.pixels_wide() < 1920);
    CHECK(e.pixels_high() < 1280);
  }
}
