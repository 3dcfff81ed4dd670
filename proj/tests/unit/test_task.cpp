#include <cmath>

#include "camco/errors.hpp"
#include "camco/rng.hpp"
#include "camco/task.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace camco;

namespace {

// Area under the interpolated precision-recall curve, computed from the
// list of (recall, precision) points at every rank.
double pr_curve_ap(const std::vector<bool>& tp, int n_gt) {
  if (n_gt == 0) return tp.empty() ? 1.0 : 0.0;
  std::vector<std::pair<double, double>> pts;
  int hits = 0;
  for (std::size_t k = 0; k < tp.size(); ++k) {
    hits += tp[k];
    pts.emplace_back(static_cast<double>(hits) / n_gt, static_cast<double>(hits) / (k + 1));
  }
  double ap = 0.0, prev_r = 0.0;
  for (const auto& [r, p] : pts) {
    if (r <= prev_r) continue;
    double best = 0.0;
    for (const auto& [r2, p2] : pts)
      if (r2 >= r) best = std::max(best, p2);
    ap += (r - prev_r) * best;
    prev_r = r;
  }
  return ap;
}

GroundTruth grid_with(std::vector<GtObject> objs) {
  auto gt = GroundTruth::empty_grid(16, 12);
  for (const auto& o : objs)
    for (int c : o.cells) {
      gt.occupied[c] = 1;
      gt.cell_class[c] = o.class_id;
    }
  gt.objects = std::move(objs);
  return gt;
}

}  // namespace

TEST_CASE("binary cross-entropy") {
  const std::vector<double> half(6, 0.5);
  const std::vector<std::uint8_t> y{1, 0, 1, 0, 0, 1};
  CHECK(binary_cross_entropy(half, y, 1e-7) == doctest::Approx(std::log(2.0)));
  const std::vector<double> perfect{1, 0, 1, 0, 0, 1};
  CHECK(binary_cross_entropy(perfect, y, 1e-7) == doctest::Approx(-std::log(1 - 1e-7)));
  CHECK_THROWS_AS(binary_cross_entropy(half, std::vector<std::uint8_t>{1}, 1e-7), ShapeError);
}

TEST_CASE("average precision examples") {
  CHECK(average_precision({true, true}, 2) == 1.0);
  CHECK(average_precision({true, false}, 2) == 0.5);
  CHECK(average_precision({false, true}, 1) == 0.5);
  CHECK(average_precision({false, true, true}, 2) == doctest::Approx(2.0 / 3));
  CHECK(average_precision({}, 0) == 1.0);
  CHECK(average_precision({false}, 0) == 0.0);
  CHECK(average_precision({}, 3) == 0.0);
}

TEST_CASE("average precision equals the PR-curve oracle on every small case") {
  for (int n = 0; n <= 6; ++n) {
    for (int mask = 0; mask < (1 << n); ++mask) {
      std::vector<bool> tp(n);
      int hits = 0;
      for (int k = 0; k < n; ++k) hits += tp[k] = (mask >> k) & 1;
      for (int n_gt = hits; n_gt <= 3; ++n_gt) {
        CHECK(average_precision(tp, n_gt) == doctest::Approx(pr_curve_ap(tp, n_gt)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("detections and matching") {
  std::vector<double> scores(16 * 12, 0.1);
  std::vector<int> classes(16 * 12, 0);
  for (int c : {0, 1, 16}) scores[c] = 0.9;
  scores[1] = 0.95;
  for (int c : {40, 41}) {
    scores[c] = 0.7;
    classes[c] = 2;
  }
  const auto dets = extract_detections(scores, classes, 16, 12);
  REQUIRE(dets.size() == 2);
  CHECK(dets[0].cells == std::vector<int>{0, 1, 16});
  CHECK(dets[0].score == 0.95);
  CHECK(dets[1].class_id == 2);

  CHECK(grid_iou(std::vector<int>{1, 2, 3}, std::vector<int>{2, 3, 4}) == doctest::Approx(0.5));
  CHECK(grid_iou(std::vector<int>{}, std::vector<int>{}) == 0.0);

  const auto gt = grid_with({{0, {0, 1, 16, 17}}, {2, {40, 41}}});
  const auto tp = match_detections(dets, gt.objects, 0.5);
  CHECK(tp == std::vector<bool>{true, true});
  CHECK(match_detections(dets, gt.objects, 0.8) == std::vector<bool>{false, true});

  const auto rep = evaluate_scores(scores, classes, gt, 3, coco_thresholds());
  CHECK(rep.true_positives_50 == 2);
  CHECK(rep.tp_ratio_180 == doctest::Approx(2.0 / 3));
  CHECK(rep.weighted_fitness == doctest::Approx(rep.map_score + 1.1 * rep.tp_ratio_180));

  // no targets at all: perfect when nothing is detected
  const auto empty = GroundTruth::empty_grid(16, 12);
  std::vector<double> quiet(16 * 12, 0.0);
  const auto r0 = evaluate_scores(quiet, classes, empty, 0, coco_thresholds());
  CHECK(r0.map_score == 1.0);
  CHECK(r0.tp_ratio_180 == 1.0);
}

TEST_CASE("coco thresholds") {
  const auto t = coco_thresholds();
  REQUIRE(t.size() == 10);
  CHECK(t.front() == 0.5);
  CHECK(t.back() == doctest::Approx(0.95));
}

TEST_CASE("fitness") {
  EvalReport a, b;
  a.weighted_fitness = 0.2;
  b.weighted_fitness = 0.4;
  const std::vector<EvalReport> v{a, b};
  CHECK(fitness(v) == doctest::Approx(0.3));
  CHECK_THROWS_AS(fitness(std::vector<EvalReport>{}), DomainError);
}

TEST_CASE("detector") {
  Detector det(7);
  const auto img = testing::ramp_image(48, 36, 5.0, 250.0);
  const auto gt = grid_with({{1, {20, 21, 36, 37}}});

  SUBCASE("loss and loss_and_backward agree") {
    det.zero_grad();
    const auto r = det.loss_and_backward(img, gt, false);
    CHECK(r.total == doctest::Approx(det.loss(img, gt)));
    CHECK(r.total == doctest::Approx(r.bce + r.class_ce));
    CHECK(r.output.scores.size() == 16 * 12);
    CHECK(det.pooled_features(img).size() == kPooledFeatures);
  }
  SUBCASE("image gradient matches central differences") {
    det.zero_grad();
    const auto r = det.loss_and_backward(img, gt, true);
    REQUIRE(r.d_image.size() == img.size());
    Rng rng(3);
    const double h = 1e-4;
    double worst = 0.0;
    for (int probe = 0; probe < 60; ++probe) {
      const auto i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(img.size()) - 1));
      Image up = img, down = img;
      up.pixels[i] += h;
      down.pixels[i] -= h;
      const double fd = (det.loss(up, gt) - det.loss(down, gt)) / (2 * h);
      worst = std::max(worst, std::abs(fd - r.d_image[i]) / std::max(1e-9, std::abs(fd) + std::abs(r.d_image[i])));
    }
    CHECK(worst < 1e-4);
  }
  SUBCASE("parameter gradient matches central differences") {
    det.zero_grad();
    det.loss_and_backward(img, gt, false);
    std::vector<nn::ParamRef> params;
    det.collect(params);
    Rng rng(4);
    const double h = 1e-6;
    double worst = 0.0;
    for (int probe = 0; probe < 60; ++probe) {
      auto& p = params[uniform_int(rng, 0, static_cast<int>(params.size()) - 1)];
      const auto i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(p.value.size()) - 1));
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double up = det.loss(img, gt);
      p.value[i] = saved - h;
      const double down = det.loss(img, gt);
      p.value[i] = saved;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - p.grad[i]) / std::max(1e-9, std::abs(fd) + std::abs(p.grad[i])));
    }
    CHECK(worst < 1e-4);
  }
  SUBCASE("a few hundred steps learn a fixed frame") {
    nn::AdamOptimizer opt({3e-3, 0.9, 0.999, 1e-8, 0.0});
    std::vector<nn::ParamRef> params;
    det.collect(params);
    const double before = det.loss(img, gt);
    for (int s = 0; s < 300; ++s) {
      det.zero_grad();
      det.loss_and_backward(img, gt, false);
      opt.step(params);
    }
    CHECK(det.loss(img, gt) < 0.5 * before);
  }
  SUBCASE("grid mismatch") {
    CHECK_THROWS_AS((void)det.loss(img, GroundTruth::empty_grid(8, 6)), ShapeError);
    CHECK_THROWS_AS((void)det.infer(Image{}), ShapeError);
  }
}
