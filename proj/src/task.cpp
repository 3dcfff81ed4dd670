#include "camco/task.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "camco/errors.hpp"
#include "camco/rng.hpp"

namespace camco {

namespace {

struct Tap {
  int src;
  double w;
};

// Area-average weights mapping n source samples onto t equal bins.
std::vector<std::vector<Tap>> area_weights(int n, int t) {
  std::vector<std::vector<Tap>> out(static_cast<std::size_t>(t));
  const double bw = static_cast<double>(n) / t;
  for (int b = 0; b < t; ++b) {
    const double lo = b * bw;
    const double hi = (b + 1) * bw;
    const int s0 = static_cast<int>(std::floor(lo));
    const int s1 = std::min(n - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int s = s0; s <= s1; ++s) {
      const double ov = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      if (ov > 0.0) out[b].push_back({s, ov / bw});
    }
  }
  return out;
}

constexpr int kNeighbours[8][2] = {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::vector<int> DetectorOutput::cell_classes() const {
  std::vector<int> out(static_cast<std::size_t>(class_logits.rows()));
  for (Eigen::Index i = 0; i < class_logits.rows(); ++i) {
    Eigen::Index k = 0;
    class_logits.row(i).maxCoeff(&k);
    out[i] = static_cast<int>(k);
  }
  return out;
}

Detector::Detector(std::uint64_t seed, DetectorConfig cfg)
    : cfg_(cfg),
      trunk_(kCellFeatures, {{cfg.hidden1, nn::Activation::Relu}, {cfg.hidden2, nn::Activation::Relu}},
             derive_seed(seed, {1})),
      head_(cfg.hidden2, 1 + kNumClasses, nn::Activation::Identity, derive_seed(seed, {2})) {
  if (cfg.sub != 3) throw ConfigError("detector: only 3x3 sub-blocks per cell are supported");
  if (2 * cfg.hidden2 != kPooledFeatures) throw ConfigError("detector: hidden2 must be half the pooled width");
}

Detector::Features Detector::features(const Image& img) const {
  if (img.empty()) throw ShapeError("detector: empty image");
  const int mw = cfg_.grid_cols * cfg_.sub;
  const int mh = cfg_.grid_rows * cfg_.sub;
  const auto wx = area_weights(img.width, mw);
  const auto wy = area_weights(img.height, mh);

  Features f;
  f.width = img.width;
  f.height = img.height;
  Eigen::MatrixXd tmp(img.height, mw);
  for (int y = 0; y < img.height; ++y) {
    const auto row = img.row(y);
    for (int b = 0; b < mw; ++b) {
      double s = 0.0;
      for (const auto& t : wx[b]) s += t.w * row[t.src];
      tmp(y, b) = s;
    }
  }
  f.map = Eigen::MatrixXd::Zero(mh, mw);
  for (int b = 0; b < mh; ++b) {
    for (const auto& t : wy[b]) f.map.row(b) += t.w * tmp.row(t.src);
  }
  f.map /= cfg_.white_level;

  const int cols = cfg_.grid_cols;
  const int rows = cfg_.grid_rows;
  Eigen::MatrixXd cell_mean(rows, cols);
  for (int cy = 0; cy < rows; ++cy) {
    for (int cx = 0; cx < cols; ++cx) cell_mean(cy, cx) = f.map.block(cy * 3, cx * 3, 3, 3).mean();
  }
  f.x.resize(cells(), kCellFeatures);
  for (int cy = 0; cy < rows; ++cy) {
    for (int cx = 0; cx < cols; ++cx) {
      const int c = cy * cols + cx;
      const double own = cell_mean(cy, cx);
      int k = 0;
      // Sub-block values relative to the cell mean, neighbour means relative
      // to the cell mean, then the cell mean itself.
      for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) f.x(c, k++) = f.map(cy * 3 + j, cx * 3 + i) - own;
      }
      for (const auto& n : kNeighbours) {
        const int nx = std::clamp(cx + n[0], 0, cols - 1);
        const int ny = std::clamp(cy + n[1], 0, rows - 1);
        f.x(c, k++) = cell_mean(ny, nx) - own;
      }
      f.x(c, k++) = own;
      f.x(c, k++) = 2.0 * (cx + 0.5) / cols - 1.0;
      f.x(c, k++) = 2.0 * (cy + 0.5) / rows - 1.0;
    }
  }
  return f;
}

std::vector<double> Detector::image_gradient(const Features& f, const nn::Tensor& dx) const {
  const int cols = cfg_.grid_cols;
  const int rows = cfg_.grid_rows;
  const int mw = cols * 3;
  const int mh = rows * 3;
  Eigen::MatrixXd dmap = Eigen::MatrixXd::Zero(mh, mw);
  Eigen::MatrixXd d_mean = Eigen::MatrixXd::Zero(rows, cols);  // dL/d(cell mean)
  for (int cy = 0; cy < rows; ++cy) {
    for (int cx = 0; cx < cols; ++cx) {
      const int c = cy * cols + cx;
      int k = 0;
      for (int j = 0; j < 3; ++j) {
        for (int i = 0; i < 3; ++i) {
          dmap(cy * 3 + j, cx * 3 + i) += dx(c, k);
          d_mean(cy, cx) -= dx(c, k++);
        }
      }
      for (const auto& n : kNeighbours) {
        const int nx = std::clamp(cx + n[0], 0, cols - 1);
        const int ny = std::clamp(cy + n[1], 0, rows - 1);
        d_mean(ny, nx) += dx(c, k);
        d_mean(cy, cx) -= dx(c, k++);
      }
      d_mean(cy, cx) += dx(c, k++);
    }
  }
  for (int cy = 0; cy < rows; ++cy) {
    for (int cx = 0; cx < cols; ++cx) dmap.block(cy * 3, cx * 3, 3, 3).array() += d_mean(cy, cx) / 9.0;
  }
  dmap /= cfg_.white_level;

  const auto wx = area_weights(f.width, mw);
  const auto wy = area_weights(f.height, mh);
  Eigen::MatrixXd dtmp = Eigen::MatrixXd::Zero(f.height, mw);
  for (int b = 0; b < mh; ++b) {
    for (const auto& t : wy[b]) dtmp.row(t.src) += t.w * dmap.row(b);
  }
  std::vector<double> d(static_cast<std::size_t>(f.width) * f.height, 0.0);
  for (int y = 0; y < f.height; ++y) {
    double* row = d.data() + static_cast<std::size_t>(y) * f.width;
    for (int b = 0; b < mw; ++b) {
      const double g = dtmp(y, b);
      if (g == 0.0) continue;
      for (const auto& t : wx[b]) row[t.src] += t.w * g;
    }
  }
  return d;
}

DetectorOutput Detector::infer(const Image& img) const {
  const auto f = features(img);
  const nn::Tensor out = head_.infer(trunk_.infer(f.x));
  DetectorOutput o;
  o.scores = out.col(0).unaryExpr([](double z) { return sigmoid(z); });
  o.class_logits = out.rightCols(kNumClasses);
  return o;
}

std::vector<double> Detector::pooled_features(const Image& img) const {
  const nn::Tensor h = trunk_.infer(features(img).x);
  std::vector<double> out(kPooledFeatures);
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    out[j] = h.col(j).mean();
    out[h.cols() + j] = h.col(j).maxCoeff();
  }
  return out;
}

double binary_cross_entropy(std::span<const double> scores, std::span<const std::uint8_t> targets, double epsilon) {
  if (scores.size() != targets.size() || scores.empty()) throw ShapeError("bce: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], epsilon, 1.0 - epsilon);
    acc -= targets[i] ? std::log(p) : std::log(1.0 - p);
  }
  return acc / static_cast<double>(scores.size());
}

void Detector::check_grid(const DetectorConfig& cfg, const GroundTruth& gt) {
  if (gt.cols != cfg.grid_cols || gt.rows != cfg.grid_rows ||
      gt.occupied.size() != static_cast<std::size_t>(gt.cols * gt.rows) || gt.cell_class.size() != gt.occupied.size()) {
    throw ShapeError("ground-truth grid does not match the detector grid");
  }
}

namespace {

// Loss and dL/d(head output) for one head output matrix.
double head_loss(const nn::Tensor& out, const GroundTruth& gt, double eps, nn::Tensor* d_out, double* bce_out,
                 double* ce_out) {
  const auto n = out.rows();
  double bce = 0.0;
  double ce = 0.0;
  int occupied = 0;
  for (Eigen::Index c = 0; c < n; ++c) occupied += gt.occupied[c] ? 1 : 0;
  if (d_out) *d_out = nn::Tensor::Zero(n, out.cols());
  for (Eigen::Index c = 0; c < n; ++c) {
    const double y = gt.occupied[c] ? 1.0 : 0.0;
    const double p_raw = sigmoid(out(c, 0));
    const double p = std::clamp(p_raw, eps, 1.0 - eps);
    bce -= y > 0 ? std::log(p) : std::log(1.0 - p);
    if (d_out && p == p_raw) (*d_out)(c, 0) = (p - y) / static_cast<double>(n);
    if (gt.occupied[c] && gt.cell_class[c] >= 0) {
      const auto logits = out.row(c).tail(kNumClasses);
      const double m = logits.maxCoeff();
      const Eigen::RowVectorXd e = (logits.array() - m).exp().matrix();
      const double z = e.sum();
      ce -= std::log(e(gt.cell_class[c]) / z);
      if (d_out) {
        for (int k = 0; k < kNumClasses; ++k) {
          (*d_out)(c, 1 + k) = (e(k) / z - (k == gt.cell_class[c] ? 1.0 : 0.0)) / occupied;
        }
      }
    }
  }
  bce /= static_cast<double>(n);
  if (occupied > 0) ce /= occupied;
  if (bce_out) *bce_out = bce;
  if (ce_out) *ce_out = ce;
  return bce + ce;
}

}  // namespace

double Detector::loss(const Image& img, const GroundTruth& gt) const {
  check_grid(cfg_, gt);
  const auto out = head_.infer(trunk_.infer(features(img).x));
  return head_loss(out, gt, cfg_.epsilon, nullptr, nullptr, nullptr);
}

TaskLoss Detector::loss_and_backward(const Image& img, const GroundTruth& gt, bool want_image_gradient) {
  check_grid(cfg_, gt);
  const auto f = features(img);
  const nn::Tensor out = head_.forward(trunk_.forward(f.x));
  TaskLoss r;
  nn::Tensor d_out;
  r.total = head_loss(out, gt, cfg_.epsilon, &d_out, &r.bce, &r.class_ce);
  r.output.scores = out.col(0).unaryExpr([](double z) { return sigmoid(z); });
  r.output.class_logits = out.rightCols(kNumClasses);
  const nn::Tensor dx = trunk_.backward(head_.backward(d_out));
  if (want_image_gradient) r.d_image = image_gradient(f, dx);
  return r;
}

void Detector::zero_grad() {
  trunk_.zero_grad();
  head_.zero_grad();
}

void Detector::collect(std::vector<nn::ParamRef>& out) {
  trunk_.collect("detector.trunk", out);
  out.push_back({"detector.head", head_.parameters(), head_.gradients(), {head_.in_dim() + 1, head_.out_dim()}});
}

std::vector<Detection> extract_detections(std::span<const double> scores, std::span<const int> classes, int cols,
                                          int rows, double threshold) {
  const auto n = static_cast<std::size_t>(cols * rows);
  if (scores.size() != n || classes.size() != n) throw ShapeError("extract_detections: grid size mismatch");
  std::vector<int> label(n, -1);
  std::vector<Detection> out;
  std::vector<int> stack;
  for (int start = 0; start < cols * rows; ++start) {
    if (label[start] >= 0 || scores[start] < threshold) continue;
    const int id = static_cast<int>(out.size());
    Detection d;
    std::array<int, kNumClasses> votes{};
    label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      d.cells.push_back(c);
      d.score = std::max(d.score, scores[c]);
      if (classes[c] >= 0 && classes[c] < kNumClasses) ++votes[classes[c]];
      const int cx = c % cols;
      const int cy = c / cols;
      const int nb[4][2] = {{cx - 1, cy}, {cx + 1, cy}, {cx, cy - 1}, {cx, cy + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[0] >= cols || q[1] < 0 || q[1] >= rows) continue;
        const int k = q[1] * cols + q[0];
        if (label[k] < 0 && scores[k] >= threshold) {
          label[k] = id;
          stack.push_back(k);
        }
      }
    }
    std::sort(d.cells.begin(), d.cells.end());
    d.class_id = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    out.push_back(std::move(d));
  }
  return out;
}

double grid_iou(std::span<const int> a, std::span<const int> b) {
  std::size_t i = 0, j = 0, inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<bool> match_detections(const std::vector<Detection>& ranked, const std::vector<GtObject>& gt,
                                   double iou_threshold) {
  std::vector<bool> taken(gt.size(), false);
  std::vector<bool> tp(ranked.size(), false);
  for (std::size_t d = 0; d < ranked.size(); ++d) {
    int best = -1;
    double best_iou = iou_threshold;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g] || gt[g].class_id != ranked[d].class_id) continue;
      const double iou = grid_iou(ranked[d].cells, gt[g].cells);
      if (iou >= best_iou && (best < 0 || iou > best_iou)) {
        best = static_cast<int>(g);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      tp[d] = true;
    }
  }
  return tp;
}

double average_precision(const std::vector<bool>& tp, int n_gt) {
  if (n_gt == 0) return tp.empty() ? 1.0 : 0.0;
  const std::size_t n = tp.size();
  std::vector<double> precision(n);
  int hits = 0;
  for (std::size_t k = 0; k < n; ++k) {
    hits += tp[k] ? 1 : 0;
    precision[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  // Precision envelope: best precision at any rank at or below this one.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (tp[k]) ap += precision[k];
  }
  return ap / n_gt;
}

std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int k = 50; k <= 95; k += 5) t.push_back(k / 100.0);
  return t;
}

EvalReport evaluate_detections(std::vector<Detection> dets, const GroundTruth& gt, int in_fov_180_count,
                               std::span<const double> thresholds) {
  if (thresholds.empty()) throw ConfigError("evaluate: no overlap thresholds");
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  EvalReport r;
  r.detections = static_cast<int>(dets.size());
  r.in_fov_180_count = in_fov_180_count;
  const int n_gt = static_cast<int>(gt.objects.size());
  double sum = 0.0;
  for (double thr : thresholds) {
    sum += average_precision(match_detections(dets, gt.objects, thr), n_gt);
  }
  r.map_score = sum / static_cast<double>(thresholds.size());

  const auto tp50 = match_detections(dets, gt.objects, 0.5);
  r.true_positives_50 = static_cast<int>(std::count(tp50.begin(), tp50.end(), true));
  r.ap50 = average_precision(tp50, n_gt);
  r.tp_ratio_180 = in_fov_180_count > 0
                       ? std::min(1.0, static_cast<double>(r.true_positives_50) / in_fov_180_count)
                       : 1.0;
  r.weighted_fitness = kMapWeight * r.map_score + kTpRatioWeight * r.tp_ratio_180;
  return r;
}

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> classes, const GroundTruth& gt,
                           int in_fov_180_count, std::span<const double> thresholds, double score_threshold) {
  return evaluate_detections(extract_detections(scores, classes, gt.cols, gt.rows, score_threshold), gt,
                             in_fov_180_count, thresholds);
}

EvalReport evaluate(const Detector& det, const Image& img, const FrameBundle& bundle,
                    std::span<const double> thresholds) {
  const auto out = det.infer(img);
  const auto classes = out.cell_classes();
  std::vector<double> scores(out.scores.data(), out.scores.data() + out.scores.size());
  return evaluate_scores(scores, classes, bundle.ground_truth, bundle.in_fov_180_count, thresholds);
}

double fitness(std::span<const EvalReport> reports) {
  if (reports.empty()) throw DomainError("fitness: no reports");
  double s = 0.0;
  for (const auto& r : reports) s += r.weighted_fitness;
  return s / static_cast<double>(reports.size());
}

}  // namespace camco
