#include <algorithm>
#include <cmath>
#include <numeric>

#include "camco/errors.hpp"
#include "camco/formation.hpp"
#include "camco/render.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace camco;

namespace {

NoiseModel model(double sp, double sr) {
  NoiseModel m;
  m.sigma_p = sp;
  m.sigma_r = sr;
  return m;
}

double sample_variance(const Image& noisy, double mean_ref) {
  double acc = 0.0;
  for (double v : noisy.pixels) acc += (v - mean_ref) * (v - mean_ref);
  return acc / static_cast<double>(noisy.size());
}

}  // namespace

TEST_CASE("gain conversion uses 20 dB per decade") {
  CHECK(db_to_linear(20.0) == doctest::Approx(10.0));
  CHECK(db_to_linear(0.0) == doctest::Approx(1.0));
  CHECK(linear_to_db(db_to_linear(13.7)) == doctest::Approx(13.7));
  CHECK(DynamicParams{5.0, 6.0}.gain_linear() == doctest::Approx(std::pow(10.0, 0.3)));
}

TEST_CASE("dynamic params clamp to the controller bounds") {
  const auto c = DynamicParams{80.0, -4.0}.clamped();
  CHECK(c.exposure_ms == kExposureMaxMs);
  CHECK(c.gain_db == kGainMinDb);
  CHECK(c.in_bounds());
  CHECK_FALSE(DynamicParams{0.05, 10.0}.in_bounds());
}

TEST_CASE("scale_intensity") {
  const DynamicParams calib{5.0, 10.0};
  Image base(2, 1, 100.0);

  SUBCASE("identity at the anchor") {
    CHECK(scale_intensity(base, calib, calib, 1.0).pixels[0] == doctest::Approx(100.0));
  }
  SUBCASE("reciprocal exposure and gain cancel") {
    const auto cur = DynamicParams::from_linear_gain(10.0, 0.5 * calib.gain_linear());
    CHECK(scale_intensity(base, calib, cur, 1.0).pixels[1] == doctest::Approx(100.0));
  }
  SUBCASE("area factor") {
    Image b40(1, 1, 40.0);
    CHECK(scale_intensity(b40, calib, DynamicParams{10.0, 10.0}, 2.0).pixels[0] == doctest::Approx(160.0));
  }
  SUBCASE("linear in gain before clipping") {
    const auto once = scale_intensity(base, calib, DynamicParams::from_linear_gain(7.0, 2.0), 1.0);
    const auto triple = scale_intensity(base, calib, DynamicParams::from_linear_gain(7.0, 6.0), 1.0);
    CHECK(triple.pixels[0] == doctest::Approx(3.0 * once.pixels[0]));
  }
  SUBCASE("non-positive calibration is rejected") {
    CHECK_THROWS_AS(scale_intensity(base, DynamicParams{0.0, 10.0}, calib, 1.0), InvalidCalibration);
    CHECK_THROWS_AS(scale_intensity(base, DynamicParams{-1.0, 10.0}, calib, 1.0), InvalidCalibration);
  }
}

TEST_CASE("noise_variance follows the generalised affine model") {
  const auto m = model(0.5, 2.0);
  CHECK(noise_variance(m, 100.0, m.g0_linear) == doctest::Approx(29.0));
  CHECK(noise_variance(m, 100.0, 2.0 * m.g0_linear) == doctest::Approx(66.0));
  CHECK(noise_variance(m, 0.0, m.g0_linear) == doctest::Approx(4.0));
  CHECK_THROWS_AS(noise_variance(m, -1.0, m.g0_linear), DomainError);
}

TEST_CASE("add_noise") {
  SUBCASE("zero model leaves the image alone") {
    const auto img = testing::ramp_image(7, 5, 0.0, 200.0);
    const auto out = add_noise(img, model(0.0, 0.0), 3.0, 11);
    CHECK(out.pixels == img.pixels);
  }
  SUBCASE("deterministic per seed") {
    const Image img(32, 32, 50.0);
    const auto m = model(0.5, 2.0);
    CHECK(add_noise(img, m, 4.0, 9).pixels == add_noise(img, m, 4.0, 9).pixels);
    CHECK(add_noise(img, m, 4.0, 9).pixels != add_noise(img, m, 4.0, 10).pixels);
  }
  SUBCASE("empirical variance matches the model") {
    const Image img(1000, 1000, 100.0);
    const auto m = model(0.5, 2.0);
    const auto out = add_noise(img, m, m.g0_linear, 2024);
    CHECK(testing::near_rel(sample_variance(out, 100.0), 29.0, 0.02));
  }
  SUBCASE("negative input intensity is a domain error") {
    Image img(2, 2, 1.0);
    img.pixels[3] = -0.5;
    CHECK_THROWS_AS(add_noise(img, model(0.5, 2.0), 1.0, 1), DomainError);
  }
}

TEST_CASE("blur_kernel_length") {
  MotionField still;
  CHECK(blur_kernel_length(still, 20.0, 4.0) == 1);
  MotionField m;
  m.ego_speed_px_per_ms = 0.6;
  CHECK(blur_kernel_length(m, 5.0, 1.0) == 3);
  CHECK(blur_kernel_length(m, 5.0, 4.0) == 12);
  m.ego_speed_px_per_ms = 0.2;
  m.target_speeds_px_per_ms = {0.2, 0.6};
  CHECK(m.dominant_speed() == doctest::Approx(0.6));
}

TEST_CASE("apply_motion_blur") {
  SUBCASE("length one is the identity") {
    const auto img = testing::ramp_image(9, 4, 3.0, 90.0);
    CHECK(apply_motion_blur(img, 1).pixels == img.pixels);
  }
  SUBCASE("impulse spreads into a box") {
    Image img(9, 1, 0.0);
    img.at(4, 0) = 3.0;
    const auto out = apply_motion_blur(img, 3);
    CHECK(out.at(3, 0) == doctest::Approx(1.0));
    CHECK(out.at(4, 0) == doctest::Approx(1.0));
    CHECK(out.at(5, 0) == doctest::Approx(1.0));
    CHECK(out.at(2, 0) == doctest::Approx(0.0));
    CHECK(out.at(6, 0) == doctest::Approx(0.0));
  }
  SUBCASE("constants survive any length") {
    const Image img(12, 5, 42.0);
    for (int len : {2, 5, 11, 30}) {
      const auto out = apply_motion_blur(img, len);
      CHECK(std::all_of(out.pixels.begin(), out.pixels.end(), [](double v) { return std::abs(v - 42.0) < 1e-9; }));
    }
  }
  SUBCASE("vertical direction blurs columns") {
    Image img(1, 9, 0.0);
    img.at(0, 4) = 3.0;
    const auto out = apply_motion_blur(img, 3, 0.0, 1.0);
    CHECK(out.at(0, 3) == doctest::Approx(1.0));
    CHECK(out.at(0, 5) == doctest::Approx(1.0));
  }
  SUBCASE("energy away from borders is preserved") {
    Image img(40, 3, 0.0);
    img.at(20, 1) = 7.0;
    img.at(12, 0) = 2.0;
    CHECK(apply_motion_blur(img, 5).sum() == doctest::Approx(img.sum()));
  }
  SUBCASE("length below one is rejected") {
    CHECK_THROWS_AS(apply_motion_blur(Image(3, 3, 1.0), 0), DomainError);
  }
}

TEST_CASE("clip_white") {
  Image img(3, 1);
  img.pixels = {-4.0, 120.0, 300.0};
  const auto c = clip_white(img, 255);
  CHECK(c.pixels == std::vector<double>{0.0, 120.0, 255.0});
  CHECK(clip_white(c, 255).pixels == c.pixels);
}

TEST_CASE("noise scaling multiplies both coefficients") {
  const auto m = model(0.3, 0.6).scaled(10.0);
  CHECK(m.sigma_p == doctest::Approx(3.0));
  CHECK(m.sigma_r == doctest::Approx(6.0));
}

// ---- render pipeline ----

namespace {

struct PipelineFixture {
  CameraDesign design = basler_design(SensorCatalogue::builtin());
  ScenarioConfig scenario = scenario_preset("calibrated");
  FrameBundle frame;

  PipelineFixture() {
    frame.base = testing::ramp_image(40, 30, 10.0, 140.0);
    frame.ground_truth = GroundTruth::empty_grid(16, 12);
    scenario.calibration.p0_um = design.sensor.pixel_um;
  }
  void quiet() {
    scenario.calibration.noise.sigma_p = 0.0;
    scenario.calibration.noise.sigma_r = 0.0;
  }
};

}  // namespace

TEST_CASE("render with no noise and no motion equals clip(scale(base))") {
  PipelineFixture fx;
  fx.quiet();
  const DynamicParams p{9.0, 14.0};
  const auto out = forward_render(fx.frame, p, fx.design, fx.scenario, 5);
  const auto expect = clip_white(scale_intensity(fx.frame.base, fx.scenario.calibration.anchor, p, 1.0), 255);
  REQUIRE(out.size() == expect.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.pixels[i] == doctest::Approx(expect.pixels[i]));
}

TEST_CASE("calibrated parameters reproduce the base frame") {
  PipelineFixture fx;
  fx.quiet();
  const auto out = forward_render(fx.frame, fx.scenario.calibration.anchor, fx.design, fx.scenario, 5);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.pixels[i] == doctest::Approx(fx.frame.base.pixels[i]));
}

TEST_CASE("a tenfold scale saturates a mid-grey scene") {
  PipelineFixture fx;
  fx.frame.base = Image(20, 20, 127.0);
  const auto& a = fx.scenario.calibration.anchor;
  const auto out = forward_render(fx.frame, {a.exposure_ms * 10.0, a.gain_db}, fx.design, fx.scenario, 3);
  CHECK(std::all_of(out.pixels.begin(), out.pixels.end(), [](double v) { return v == 255.0; }));
}

TEST_CASE("pipeline order is scale, blur, noise, clip") {
  PipelineFixture fx;
  fx.frame.base = Image(400, 400, 40.0);
  fx.frame.motion.ego_speed_px_per_ms = 1.0;
  fx.scenario.calibration.noise.sigma_p = 0.5;
  fx.scenario.calibration.noise.sigma_r = 2.0;
  const DynamicParams p{8.0, fx.scenario.calibration.anchor.gain_db};
  FrameRenderer r(fx.frame, fx.design, fx.scenario, 77);
  const auto tr = r.render(p);
  REQUIRE(tr.blur_length == 8);

  // Noise added after blur keeps its full per-pixel variance; blurring after
  // noise would divide it by the kernel length.
  const double level = 40.0 * 8.0 / 5.0;
  const double expected = noise_variance(fx.scenario.noise_model(), level, p.gain_linear());
  CHECK(testing::near_rel(sample_variance(tr.output, level), expected, 0.03));

  // Clip comes last: bright pixels sit exactly on the white level.
  const auto bright = r.render({50.0, 30.0});
  CHECK(bright.output.max() == 255.0);
  CHECK(std::count(bright.output.pixels.begin(), bright.output.pixels.end(), 255.0) ==
        static_cast<long>(bright.output.size()));
}

TEST_CASE("renders of one frame share their noise realisation") {
  PipelineFixture fx;
  fx.frame.base = Image(30, 30, 60.0);
  FrameRenderer r(fx.frame, fx.design, fx.scenario, 8);
  const auto a = r.render({4.0, 10.0});
  const auto b = r.render({4.0, 10.0});
  CHECK(a.output.pixels == b.output.pixels);
  FrameRenderer r2(fx.frame, fx.design, fx.scenario, 8);
  CHECK(r2.render({4.0, 10.0}).output.pixels == a.output.pixels);
}

TEST_CASE("render_backward matches finite differences of the frozen render") {
  PipelineFixture fx;
  fx.frame.base = testing::ramp_image(24, 18, 5.0, 60.0);
  fx.frame.motion.ego_speed_px_per_ms = 0.4;
  FrameRenderer r(fx.frame, fx.design, fx.scenario, 99);
  const DynamicParams p{6.0, 12.0};
  const auto ref = r.render(p);

  std::vector<double> w(ref.output.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(0.37 * static_cast<double>(i));
  auto loss = [&](const DynamicParams& q) {
    const auto t = r.render_frozen(q, ref);
    return std::inner_product(w.begin(), w.end(), t.output.pixels.begin(), 0.0);
  };
  const auto g = render_backward(ref, w);
  const double h = 1e-5;
  const double fd_e = (loss({p.exposure_ms + h, p.gain_db}) - loss({p.exposure_ms - h, p.gain_db})) / (2 * h);
  const double fd_g = (loss({p.exposure_ms, p.gain_db + h}) - loss({p.exposure_ms, p.gain_db - h})) / (2 * h);
  CHECK(testing::near_rel(g.exposure_ms, fd_e, 1e-6));
  CHECK(testing::near_rel(g.gain_db, fd_g, 1e-6));
}

TEST_CASE("saturated pixels pass no gradient") {
  PipelineFixture fx;
  fx.quiet();
  fx.frame.base = Image(10, 10, 200.0);
  FrameRenderer r(fx.frame, fx.design, fx.scenario, 1);
  const auto tr = r.render({40.0, 25.0});
  const std::vector<double> ones(tr.output.size(), 1.0);
  const auto g = render_backward(tr, ones);
  CHECK(g.exposure_ms == 0.0);
  CHECK(g.gain_db == 0.0);
}
