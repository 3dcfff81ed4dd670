#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "camco/image.hpp"
#include "camco/nn.hpp"
#include "camco/scene.hpp"

namespace camco {

struct DetectorConfig {
  int grid_cols = 16;
  int grid_rows = 12;
  int sub = 3;  ///< resampled values per cell along each axis
  int hidden1 = 24;
  int hidden2 = 16;
  double epsilon = 1e-7;  ///< score clip for the cross-entropy
  double white_level = 255.0;
};

/// Per-cell inputs: 3×3 resampled values and 8 neighbour-cell means, each
/// relative to the cell mean; the cell mean; 2 position coordinates.
inline constexpr int kCellFeatures = 3 * 3 + 8 + 1 + 2;
/// Mean and max of the trunk output over cells.
inline constexpr int kPooledFeatures = 32;

struct DetectorOutput {
  Eigen::VectorXd scores;            ///< per cell, in (0,1)
  Eigen::MatrixXd class_logits;      ///< cells × kNumClasses
  [[nodiscard]] std::vector<int> cell_classes() const;
};

struct TaskLoss {
  double total = 0.0;
  double bce = 0.0;
  double class_ce = 0.0;
  std::vector<double> d_image;  ///< dL/dpixel, empty unless requested
  DetectorOutput output;        ///< detector output of this forward pass
};

/// Grid-cell detector: the image is area-resampled onto a (cols·sub)×(rows·sub)
/// map, a trunk MLP shared across cells embeds each cell's neighbourhood, and
/// a linear head emits an objectness logit and class logits per cell.
class Detector {
 public:
  explicit Detector(std::uint64_t seed, DetectorConfig cfg = {});

  [[nodiscard]] const DetectorConfig& config() const { return cfg_; }
  [[nodiscard]] int cells() const { return cfg_.grid_cols * cfg_.grid_rows; }

  [[nodiscard]] DetectorOutput infer(const Image& img) const;
  /// Trunk features pooled over cells (mean then max), kPooledFeatures long.
  [[nodiscard]] std::vector<double> pooled_features(const Image& img) const;

  /// Mean BCE over cells plus class cross-entropy over occupied cells.
  [[nodiscard]] double loss(const Image& img, const GroundTruth& gt) const;
  /// Same loss; accumulates parameter gradients and optionally returns dL/dpixel.
  TaskLoss loss_and_backward(const Image& img, const GroundTruth& gt, bool image_gradient);

  void zero_grad();
  void collect(std::vector<nn::ParamRef>& out);
  nn::Mlp& trunk() { return trunk_; }
  nn::DenseLayer& head() { return head_; }

 private:
  struct Features {
    int width = 0, height = 0;
    Eigen::MatrixXd map;  ///< (rows·sub) × (cols·sub), intensities / white_level
    nn::Tensor x;         ///< cells × kCellFeatures
  };
  [[nodiscard]] Features features(const Image& img) const;
  [[nodiscard]] std::vector<double> image_gradient(const Features& f, const nn::Tensor& dx) const;
  static void check_grid(const DetectorConfig& cfg, const GroundTruth& gt);

  DetectorConfig cfg_;
  nn::Mlp trunk_;
  nn::DenseLayer head_;
};

/// Binary cross-entropy of clipped scores against 0/1 targets, averaged.
double binary_cross_entropy(std::span<const double> scores, std::span<const std::uint8_t> targets, double epsilon);

struct Detection {
  std::vector<int> cells;  ///< sorted
  double score = 0.0;
  int class_id = 0;
};

/// 4-connected components of cells with score ≥ threshold. Each component is
/// scored by its maximum cell score and labelled with its majority class
/// (lowest class id on ties). Returned in raster order of first cell.
std::vector<Detection> extract_detections(std::span<const double> scores, std::span<const int> classes, int cols,
                                          int rows, double threshold = 0.5);

/// |a ∩ b| / |a ∪ b| over sorted cell lists.
double grid_iou(std::span<const int> a, std::span<const int> b);

/// Greedy matching in descending score order (stable for ties): each
/// detection claims the unmatched same-class object of highest IoU if that
/// IoU reaches the threshold. Returns TP flags in rank order.
std::vector<bool> match_detections(const std::vector<Detection>& ranked, const std::vector<GtObject>& gt,
                                   double iou_threshold);

/// All-point interpolated AP from TP flags in rank order. With n_gt = 0 the
/// value is 1 when there are no detections and 0 otherwise.
double average_precision(const std::vector<bool>& tp_in_rank_order, int n_gt);

struct EvalReport {
  double map_score = 0.0;
  double tp_ratio_180 = 0.0;
  double weighted_fitness = 0.0;
  double ap50 = 0.0;
  int true_positives_50 = 0;
  int detections = 0;
  int in_fov_180_count = 0;
};

inline constexpr double kMapWeight = 1.0;
inline constexpr double kTpRatioWeight = 1.1;

/// Overlap thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> coco_thresholds();

/// Scores a detection list against the frame's objects. tp_ratio is 1 when
/// no target lies in the 180° field.
EvalReport evaluate_detections(std::vector<Detection> detections, const GroundTruth& gt, int in_fov_180_count,
                               std::span<const double> thresholds);

EvalReport evaluate_scores(std::span<const double> scores, std::span<const int> classes, const GroundTruth& gt,
                           int in_fov_180_count, std::span<const double> thresholds, double score_threshold = 0.5);

EvalReport evaluate(const Detector& det, const Image& img, const FrameBundle& bundle,
                    std::span<const double> thresholds);

/// Mean weighted fitness; DomainError on an empty list.
double fitness(std::span<const EvalReport> reports);

}  // namespace camco
