#include "camco/render.hpp"

#include <cmath>

#include "camco/errors.hpp"

namespace camco {

FrameRenderer::FrameRenderer(const FrameBundle& frame, const CameraDesign& design, const ScenarioConfig& scenario,
                             std::uint64_t noise_seed)
    : frame_(frame),
      scenario_(scenario),
      noise_(scenario.noise_model()),
      area_ratio_(camco::pixel_area_ratio(design, scenario.calibration.p0_um)) {
  if (noise_.sigma_p > 0.0 || noise_.sigma_r > 0.0) z_ = standard_normal_field(frame.base.size(), noise_seed);
}

const Image& FrameRenderer::blurred(int length) {
  auto it = blurred_.find(length);
  if (it == blurred_.end()) {
    it = blurred_
             .emplace(length,
                      apply_motion_blur(frame_.base, length, frame_.motion.direction_x, frame_.motion.direction_y))
             .first;
  }
  return it->second;
}

RenderTrace FrameRenderer::render(const DynamicParams& params) {
  if (!(params.exposure_ms > 0.0)) throw DomainError("render: exposure must be positive");
  return finish(params, blur_kernel_length(frame_.motion, params.exposure_ms, scenario_.blur_multiplier), nullptr);
}

RenderTrace FrameRenderer::render_frozen(const DynamicParams& params, const RenderTrace& reference) {
  if (reference.noise.size() != frame_.base.size()) throw ShapeError("render_frozen: reference from another frame");
  return finish(params, reference.blur_length, &reference.noise);
}

RenderTrace FrameRenderer::finish(const DynamicParams& params, int blur_length,
                                  const std::vector<double>* frozen_noise) {
  RenderTrace tr;
  tr.params = params;
  tr.scale = intensity_scale_factor(scenario_.calibration.anchor, params, area_ratio_);
  tr.blur_length = blur_length;
  tr.white_level = noise_.white_level;

  // Blur is linear, so blur(s·base) is computed as s·blur(base) and the
  // blurred base is shared by every render of this frame.
  const Image& b = blurred(blur_length);
  tr.prenoise = Image(b.width, b.height);
  for (std::size_t i = 0; i < b.size(); ++i) tr.prenoise.pixels[i] = b.pixels[i] * tr.scale;

  if (frozen_noise) {
    tr.noise = *frozen_noise;
  } else {
    tr.noise.assign(b.size(), 0.0);
    if (!z_.empty()) {
      const double rel = params.gain_linear() / noise_.g0_linear;
      const double photon = rel * noise_.sigma_p * noise_.sigma_p;
      const double thermal = rel * rel * noise_.sigma_r * noise_.sigma_r;
      for (std::size_t i = 0; i < z_.size(); ++i) {
        tr.noise[i] = std::sqrt(photon * tr.prenoise.pixels[i] + thermal) * z_[i];
      }
    }
  }
  const double white = tr.white_level;
  tr.output = Image(b.width, b.height);
  for (std::size_t i = 0; i < tr.output.size(); ++i) {
    const double v = tr.prenoise.pixels[i] + tr.noise[i];
    tr.output.pixels[i] = v < 0.0 ? 0.0 : (v > white ? white : v);
  }
  return tr;
}

Image forward_render(const FrameBundle& frame, const DynamicParams& params, const CameraDesign& design,
                     const ScenarioConfig& scenario, std::uint64_t seed) {
  FrameRenderer r(frame, design, scenario, seed);
  return r.render(params).output;
}

ParamGradient render_backward(const RenderTrace& trace, std::span<const double> d_output) {
  if (d_output.size() != trace.output.size()) throw ShapeError("render_backward: gradient size mismatch");
  const double white = trace.white_level;
  // Unclipped pixels: out = s·B + n with s ∝ E·10^(G/20), so
  // dout/dE = prenoise/E and dout/dG_dB = prenoise·ln10/20.
  double acc = 0.0;
  for (std::size_t i = 0; i < d_output.size(); ++i) {
    const double v = trace.prenoise.pixels[i] + trace.noise[i];
    if (v <= 0.0 || v >= white) continue;
    acc += d_output[i] * trace.prenoise.pixels[i];
  }
  return {acc / trace.params.exposure_ms, acc * std::log(10.0) / 20.0};
}

}  // namespace camco
