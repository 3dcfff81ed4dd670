#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "camco/formation.hpp"
#include "camco/image.hpp"
#include "camco/nn.hpp"
#include "camco/render.hpp"

namespace camco {

struct AccConfig {
  int bins = 16;
  int scales = 2;
  int width = 32;          ///< branch width
  int embed_hidden = 16;   ///< first layer of the previous-parameter embedding
  int task_features = 32;  ///< pooled detector features
  double white_level = 255.0;
  DynamicParams init{5.0, 10.0};  ///< head bias starts here
};

/// Two-branch exposure/gain controller. A histogram branch reads the previous
/// image; a semantic branch reads pooled detector features concatenated with
/// an embedding of the previous parameters. Branch outputs are summed and a
/// sigmoid head is scaled onto the exposure and gain ranges.
class AccNetwork {
 public:
  explicit AccNetwork(std::uint64_t seed, AccConfig cfg = {});

  [[nodiscard]] const AccConfig& config() const { return cfg_; }

  /// Caches activations for backward().
  DynamicParams predict(const Image& prev_image, const DynamicParams& prev, std::span<const double> task_features);
  [[nodiscard]] DynamicParams infer(const Image& prev_image, const DynamicParams& prev,
                                    std::span<const double> task_features) const;

  /// Accumulates parameter gradients from dL/d(E_pred ms, G_pred dB) of the
  /// last predict(); returns dL/d(task_features).
  std::vector<double> backward(const ParamGradient& d_pred);

  void zero_grad();
  void collect(std::vector<nn::ParamRef>& out);
  nn::DenseLayer& head() { return head_; }

 private:
  struct Inputs {
    nn::Tensor hist;
    nn::Tensor prev;
    nn::Tensor task;
  };
  [[nodiscard]] Inputs inputs(const Image& prev_image, const DynamicParams& prev,
                              std::span<const double> task_features) const;
  static DynamicParams decode(const nn::Tensor& sig);

  AccConfig cfg_;
  nn::Mlp hist_;
  nn::Mlp embed_;
  nn::Mlp semantic_;
  nn::DenseLayer head_;
  bool has_forward_ = false;
};

/// Pixel-size rescaling with gain priority: when the design's pixels are
/// larger than the calibration pixels the extra light first lowers gain (down
/// to unity), and exposure absorbs the rest. Gain arithmetic is linear. The
/// result is not clamped to the controller bounds.
DynamicParams rescale_for_pixel_size(const DynamicParams& pred, double p_um, double p0_um);

/// ∂(E_t, G_t,dB)/∂(E_pred, G_pred,dB), row-major [dE/dE, dE/dG, dG/dE, dG/dG].
std::array<double, 4> rescale_jacobian(const DynamicParams& pred, double p_um, double p0_um);

struct AverageAeState {
  DynamicParams current{};
  int zero_mean_events = 0;  ///< frames where the mean was 0 and the maximum factor was used
};

/// Drives the mean intensity toward half the white level by scaling exposure
/// and linear gain each by √(0.5·white/I_mean), then clamping. Updates state.
DynamicParams average_ae_step(AverageAeState& state, const Image& img, int white_level = 255);

}  // namespace camco
