#include <cmath>

#include "camco/errors.hpp"
#include "camco/scene.hpp"
#include "camco/serialize.hpp"
#include "doctest.h"

using namespace camco;

namespace {

World single_target_world(int class_id, double x, double y, double reflectance) {
  World w;
  Target tg;
  tg.class_id = class_id;
  tg.size = kClassSizes[class_id];
  tg.position = {x, y, class_id == 2 ? 2.2 : 0.8};
  tg.reflectance = reflectance;
  w.targets.push_back(tg);
  w.ego_speed_max = 0.0;
  return w;
}

}  // namespace

TEST_CASE("illumination profiles") {
  const IlluminationProfile constant{IlluminationKind::Constant, 0.2, 0.9, 10, 0};
  for (int t : {0, 7, 1000}) CHECK(illumination_at(constant, t) == 0.9);

  const IlluminationProfile sine{IlluminationKind::Sinusoidal, 0.1, 1.0, 40, 0};
  CHECK(illumination_at(sine, 10) == doctest::Approx(1.0));
  CHECK(illumination_at(sine, 30) == doctest::Approx(0.1));
  CHECK(illumination_at(sine, 0) == doctest::Approx(0.55));

  const IlluminationProfile step{IlluminationKind::AbruptStep, 0.01, 1.0, 30, 0};
  CHECK(illumination_at(step, 14) == 1.0);
  CHECK(illumination_at(step, 15) == 0.01);
  CHECK(illumination_step_at(step, 15));
  CHECK_FALSE(illumination_step_at(step, 14));
  CHECK_FALSE(illumination_step_at(constant, 3));
}

TEST_CASE("world generation") {
  WorldConfig cfg;
  SUBCASE("deterministic in (seed, episode)") {
    const auto a = to_json(generate_world(cfg, 5, 3));
    CHECK(a == to_json(generate_world(cfg, 5, 3)));
    CHECK(a != to_json(generate_world(cfg, 5, 4)));
    CHECK(a != to_json(generate_world(cfg, 6, 3)));
  }
  SUBCASE("targets respect the generator fixtures") {
    for (int ep = 0; ep < 50; ++ep) {
      const auto w = generate_world(cfg, 11, ep);
      CHECK(static_cast<int>(w.targets.size()) >= cfg.min_targets);
      CHECK(static_cast<int>(w.targets.size()) <= cfg.max_targets);
      for (const auto& tg : w.targets) {
        CHECK(tg.position.x > 2.4);
        CHECK(tg.size > 0.0);
        CHECK(tg.reflectance > 0.0);
        CHECK(tg.reflectance <= 1.0);
        CHECK(std::abs(tg.velocity.y) <= cfg.v_max);
      }
      CHECK(w.illumination.phi_min > 0.0);
      CHECK(w.illumination.phi_min <= w.illumination.phi_max);
    }
  }
  SUBCASE("ego speed stays in [0, v_max]") {
    const auto w = generate_world(cfg, 2, 0);
    for (int t = 0; t < 200; ++t) {
      CHECK(w.ego_speed_at(t) >= 0.0);
      CHECK(w.ego_speed_at(t) <= cfg.v_max + 1e-12);
    }
  }
  SUBCASE("replay through JSON") {
    const auto w = generate_world(cfg, 8, 1);
    CHECK(to_json(world_from_json(to_json(w))) == to_json(w));
  }
}

TEST_CASE("projection") {
  const auto& cat = SensorCatalogue::builtin();
  auto d = basler_design(cat);
  const auto [w, h] = image_dimensions(d);

  SUBCASE("on-axis target lands at the image centre") {
    Target tg;
    tg.position = {d.x_m + 20.0, 0.0, d.z_m};
    const auto p = project(d, tg);
    REQUIRE(p);
    CHECK(p->u == doctest::Approx(w / 2.0));
    CHECK(p->v == doctest::Approx(h / 2.0));
  }
  SUBCASE("doubling depth halves apparent size") {
    Target near_t, far_t;
    near_t.size = far_t.size = 1.7;
    near_t.class_id = far_t.class_id = 1;
    near_t.position = {d.x_m + 10.0, 0.5, d.z_m};
    far_t.position = {d.x_m + 20.0, 0.5, d.z_m};
    CHECK(project(d, far_t)->apparent_size_px == doctest::Approx(project(d, near_t)->apparent_size_px / 2.0));
  }
  SUBCASE("behind the camera is excluded") {
    Target tg;
    tg.position = {d.x_m - 1.0, 0.0, d.z_m};
    CHECK_FALSE(project(d, tg));
    tg.position.x = d.x_m;
    CHECK_FALSE(project(d, tg));
  }
  SUBCASE("rendered size uses the supersampling divisor") {
    const auto flir = flir_design(cat);
    CHECK(image_dimensions(flir)[0] == 250);
  }
  SUBCASE("degenerate images are rejected") {
    auto tiny = d;
    tiny.sensor.width_mm = 0.3;
    CHECK_THROWS_AS(image_dimensions(tiny), InvalidDesign);
  }
}

TEST_CASE("FoV monotonicity and the 180 degree superset") {
  const auto& cat = SensorCatalogue::builtin();
  WorldConfig cfg;
  for (int ep = 0; ep < 30; ++ep) {
    const auto world = generate_world(cfg, 21, ep);
    auto narrow = basler_design(cat);
    auto wide = narrow;
    wide.sensor.width_mm *= 1.6;
    const auto a = render_base_frame(world, narrow, 0, cfg);
    const auto b = render_base_frame(world, wide, 0, cfg);
    CHECK(b.ground_truth.objects.size() >= a.ground_truth.objects.size());
    CHECK(a.in_fov_180_count >= static_cast<int>(a.ground_truth.objects.size()));
    CHECK(b.in_fov_180_count >= static_cast<int>(b.ground_truth.objects.size()));
  }
}

TEST_CASE("base frame rendering") {
  const auto& cat = SensorCatalogue::builtin();
  const auto d = basler_design(cat);
  WorldConfig cfg;

  SUBCASE("bright target stands out against the background") {
    auto w = single_target_world(0, d.x_m + 12.0, 0.0, 1.0);
    w.illumination = {IlluminationKind::Constant, 1.0, 1.0, 1, 0};
    const auto fb = render_base_frame(w, d, 0, cfg);
    REQUIRE(fb.ground_truth.objects.size() == 1);
    const auto [iw, ih] = image_dimensions(d);
    const double centre = fb.base.at(iw / 2, static_cast<int>(project(d, w.targets[0])->v));
    CHECK(centre > fb.base.at(0, ih - 1));
    CHECK(centre > fb.base.at(0, 0));
    CHECK(fb.ground_truth.objects[0].class_id == 0);
    for (int c : fb.ground_truth.objects[0].cells) CHECK(fb.ground_truth.occupied[c] == 1);
  }
  SUBCASE("night frame is one percent of the day frame") {
    auto w = generate_world(cfg, 4, 2);
    w.illumination = {IlluminationKind::Constant, 1.0, 1.0, 1, 0};
    const auto day = render_base_frame(w, d, 3, cfg);
    w.illumination = {IlluminationKind::Constant, 0.01, 0.01, 1, 0};
    const auto night = render_base_frame(w, d, 3, cfg);
    CHECK(night.base.mean() == doctest::Approx(0.01 * day.base.mean()));
  }
  SUBCASE("mid reflectance in daylight is mid-range at the anchor") {
    World w;
    w.sky_reflectance = 0.5;
    w.road_reflectance = 0.5 / 1.15;
    w.illumination = {IlluminationKind::Constant, 1.0, 1.0, 1, 0};
    const auto fb = render_base_frame(w, d, 0, cfg);
    CHECK(fb.base.at(0, 0) == doctest::Approx(127.5));
  }
  SUBCASE("identical inputs give identical bundles") {
    const auto w = generate_world(cfg, 9, 0);
    const auto a = render_base_frame(w, d, 12, cfg);
    const auto b = render_base_frame(w, d, 12, cfg);
    CHECK(a.base.pixels == b.base.pixels);
    CHECK(a.ground_truth.occupied == b.ground_truth.occupied);
    CHECK(a.motion.target_speeds_px_per_ms == b.motion.target_speeds_px_per_ms);
  }
  SUBCASE("ground truth cells carry a class exactly when occupied") {
    for (int ep = 0; ep < 10; ++ep) {
      const auto fb = render_base_frame(generate_world(cfg, 13, ep), d, 0, cfg);
      const auto& gt = fb.ground_truth;
      for (int c = 0; c < gt.cells(); ++c) CHECK((gt.occupied[c] == 1) == (gt.cell_class[c] >= 0));
    }
  }
  SUBCASE("motion speeds are non-negative") {
    const auto fb = render_base_frame(generate_world(cfg, 3, 3), d, 20, cfg);
    CHECK(fb.motion.ego_speed_px_per_ms >= 0.0);
    for (double s : fb.motion.target_speeds_px_per_ms) CHECK(s >= 0.0);
  }
}
