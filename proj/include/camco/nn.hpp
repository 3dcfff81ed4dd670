#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "camco/image.hpp"

namespace camco::nn {

/// Activations are batch-major: one row per sample.
using Tensor = Eigen::MatrixXd;

enum class Activation { Identity, Relu, Sigmoid };

/// View of one parameter block and its gradient accumulator.
struct ParamRef {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
  std::vector<int> shape;
};

/// y = act(x·W + b) with W stored in_dim × out_dim.
class DenseLayer {
 public:
  DenseLayer(int in_dim, int out_dim, Activation act, std::uint64_t seed);

  [[nodiscard]] int in_dim() const { return in_; }
  [[nodiscard]] int out_dim() const { return out_; }
  [[nodiscard]] Activation activation() const { return act_; }

  /// Caches input and output for backward.
  const Tensor& forward(const Tensor& x);
  /// Pure evaluation; leaves the backward cache alone.
  [[nodiscard]] Tensor infer(const Tensor& x) const;
  /// Accumulates parameter gradients and returns dL/dx. Throws StateError
  /// when no forward pass has been cached.
  Tensor backward(const Tensor& dy);

  Eigen::Map<Eigen::MatrixXd> weights() { return {theta_.data(), in_, out_}; }
  Eigen::Map<Eigen::RowVectorXd> bias() { return {theta_.data() + in_ * out_, out_}; }
  [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> weights() const { return {theta_.data(), in_, out_}; }
  [[nodiscard]] Eigen::Map<const Eigen::RowVectorXd> bias() const { return {theta_.data() + in_ * out_, out_}; }

  std::span<double> parameters() { return theta_; }
  std::span<double> gradients() { return grad_; }
  [[nodiscard]] std::span<const double> parameters() const { return theta_; }
  [[nodiscard]] std::span<const double> gradients() const { return grad_; }
  void zero_grad();

 private:
  int in_;
  int out_;
  Activation act_;
  std::vector<double> theta_;
  std::vector<double> grad_;
  Tensor x_cache_;
  Tensor y_cache_;
  bool has_cache_ = false;
};

struct LayerSpec {
  int out_dim;
  Activation act;
};

/// Fixed stack of dense layers.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in_dim, const std::vector<LayerSpec>& layers, std::uint64_t seed);

  [[nodiscard]] int in_dim() const { return layers_.front().in_dim(); }
  [[nodiscard]] int out_dim() const { return layers_.back().out_dim(); }

  const Tensor& forward(const Tensor& x);
  [[nodiscard]] Tensor infer(const Tensor& x) const;
  Tensor backward(const Tensor& dy);
  void zero_grad();

  [[nodiscard]] std::size_t parameter_count() const;
  /// Parameter views named `<prefix>.<layer>`.
  void collect(const std::string& prefix, std::vector<ParamRef>& out);

  std::vector<DenseLayer>& layers() { return layers_; }
  [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }

 private:
  std::vector<DenseLayer> layers_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  ///< decoupled (AdamW) when > 0
};

/// Bias-corrected Adam with optional decoupled weight decay. Moment buffers
/// are allocated on the first step and must keep the same layout afterwards.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg = {});

  void step(std::span<const ParamRef> params);

  [[nodiscard]] const AdamConfig& config() const { return cfg_; }
  AdamConfig& config() { return cfg_; }
  [[nodiscard]] long steps() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Concatenated normalised intensity histograms over a quadtree: level 0 is
/// the whole image, level l splits it into 4^l regions. Values are binned on
/// [0, white_level]. Throws DomainError on an empty image.
std::vector<double> multiscale_histogram(const Image& img, int bins, int scales, double white_level = 255.0);

/// Number of features multiscale_histogram returns.
int multiscale_histogram_size(int bins, int scales);

/// Flat little-endian f64 dump of the blocks plus `<stem>.json` listing
/// names, shapes and offsets.
void save_checkpoint(const std::filesystem::path& stem, std::span<const ParamRef> params);
/// Loads values saved by save_checkpoint; names and shapes must match.
void load_checkpoint(const std::filesystem::path& stem, std::span<const ParamRef> params);

}  // namespace camco::nn
