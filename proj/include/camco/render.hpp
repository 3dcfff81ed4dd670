#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "camco/design.hpp"
#include "camco/formation.hpp"
#include "camco/scenario.hpp"
#include "camco/scene.hpp"

namespace camco {

/// Everything a backward pass through the formation chain needs: the blur
/// length and the noise realisation are frozen, so the rendered pixel is
/// clip(prenoise + noise) with prenoise linear in E_t and G_t,lin.
struct RenderTrace {
  DynamicParams params;
  double scale = 1.0;
  int blur_length = 1;
  double white_level = 255.0;
  Image prenoise;
  std::vector<double> noise;
  Image output;
};

/// d(loss)/d(exposure_ms, gain_db).
struct ParamGradient {
  double exposure_ms = 0.0;
  double gain_db = 0.0;
};

/// Renders one frame repeatedly under different dynamic parameters. The unit
/// normal field is drawn once from the seed, so every render of the frame
/// shares its noise realisation (common random numbers).
class FrameRenderer {
 public:
  FrameRenderer(const FrameBundle& frame, const CameraDesign& design, const ScenarioConfig& scenario,
                std::uint64_t noise_seed);

  /// scale → blur → noise → clip.
  RenderTrace render(const DynamicParams& params);

  /// Same chain with the blur length and the additive noise term taken from
  /// `reference` instead of being recomputed from `params`.
  RenderTrace render_frozen(const DynamicParams& params, const RenderTrace& reference);

  [[nodiscard]] double pixel_area_ratio() const { return area_ratio_; }

 private:
  const FrameBundle& frame_;
  ScenarioConfig scenario_;
  NoiseModel noise_;
  double area_ratio_;
  std::vector<double> z_;
  const Image& blurred(int length);
  RenderTrace finish(const DynamicParams& params, int blur_length, const std::vector<double>* frozen_noise);

  std::map<int, Image> blurred_;  // blur is linear, so blur(base) is cached per length
};

/// One-shot render; same result as FrameRenderer(...).render(params).output.
Image forward_render(const FrameBundle& frame, const DynamicParams& params, const CameraDesign& design,
                     const ScenarioConfig& scenario, std::uint64_t seed);

/// Chains dL/d(output pixels) to (E_t, G_t). Clipped pixels pass no gradient.
ParamGradient render_backward(const RenderTrace& trace, std::span<const double> d_output);

}  // namespace camco
