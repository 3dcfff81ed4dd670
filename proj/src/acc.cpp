#include "camco/acc.hpp"

#include <algorithm>
#include <cmath>

#include "camco/errors.hpp"
#include "camco/rng.hpp"

namespace camco {

using nn::Activation;

AccNetwork::AccNetwork(std::uint64_t seed, AccConfig cfg)
    : cfg_(cfg),
      hist_(nn::multiscale_histogram_size(cfg.bins, cfg.scales),
            {{cfg.width, Activation::Relu}, {cfg.width, Activation::Identity}}, derive_seed(seed, {1})),
      embed_(2, {{cfg.embed_hidden, Activation::Relu}, {cfg.width, Activation::Relu}}, derive_seed(seed, {2})),
      semantic_(cfg.task_features + cfg.width, {{cfg.width, Activation::Relu}, {cfg.width, Activation::Identity}},
                derive_seed(seed, {3})),
      head_(cfg.width, 2, Activation::Sigmoid, derive_seed(seed, {4})) {
  const auto logit = [](double u) { return std::log(u / (1.0 - u)); };
  head_.bias()(0) = logit((std::clamp(cfg.init.exposure_ms, kExposureMinMs, kExposureMaxMs) - kExposureMinMs + 1e-3) /
                          (kExposureRangeMs + 2e-3));
  head_.bias()(1) =
      logit((std::clamp(cfg.init.gain_db, kGainMinDb, kGainMaxDb) - kGainMinDb + 1e-3) / (kGainRangeDb + 2e-3));
}

AccNetwork::Inputs AccNetwork::inputs(const Image& prev_image, const DynamicParams& prev,
                                      std::span<const double> task_features) const {
  if (static_cast<int>(task_features.size()) != cfg_.task_features) {
    throw ShapeError("acc: expected " + std::to_string(cfg_.task_features) + " task features, got " +
                     std::to_string(task_features.size()));
  }
  Inputs in;
  const auto h = nn::multiscale_histogram(prev_image, cfg_.bins, cfg_.scales, cfg_.white_level);
  in.hist = Eigen::Map<const Eigen::RowVectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
  in.prev.resize(1, 2);
  in.prev(0, 0) = 2.0 * (prev.exposure_ms - kExposureMinMs) / kExposureRangeMs - 1.0;
  in.prev(0, 1) = 2.0 * (prev.gain_db - kGainMinDb) / kGainRangeDb - 1.0;
  in.task = Eigen::Map<const Eigen::RowVectorXd>(task_features.data(), static_cast<Eigen::Index>(task_features.size()));
  return in;
}

DynamicParams AccNetwork::decode(const nn::Tensor& sig) {
  return {kExposureMinMs + kExposureRangeMs * sig(0, 0), kGainMinDb + kGainRangeDb * sig(0, 1)};
}

DynamicParams AccNetwork::predict(const Image& prev_image, const DynamicParams& prev,
                                  std::span<const double> task_features) {
  const auto in = inputs(prev_image, prev, task_features);
  const nn::Tensor& a = hist_.forward(in.hist);
  const nn::Tensor& e = embed_.forward(in.prev);
  nn::Tensor cat(1, cfg_.task_features + cfg_.width);
  cat << in.task, e;
  const nn::Tensor& s = semantic_.forward(cat);
  const nn::Tensor sum = a + s;
  has_forward_ = true;
  return decode(head_.forward(sum));
}

DynamicParams AccNetwork::infer(const Image& prev_image, const DynamicParams& prev,
                                std::span<const double> task_features) const {
  const auto in = inputs(prev_image, prev, task_features);
  nn::Tensor cat(1, cfg_.task_features + cfg_.width);
  cat << in.task, embed_.infer(in.prev);
  return decode(head_.infer(hist_.infer(in.hist) + semantic_.infer(cat)));
}

std::vector<double> AccNetwork::backward(const ParamGradient& d_pred) {
  if (!has_forward_) throw StateError("acc: backward called before predict");
  nn::Tensor d_sig(1, 2);
  d_sig << d_pred.exposure_ms * kExposureRangeMs, d_pred.gain_db * kGainRangeDb;
  const nn::Tensor d_sum = head_.backward(d_sig);
  hist_.backward(d_sum);
  const nn::Tensor d_cat = semantic_.backward(d_sum);
  embed_.backward(d_cat.rightCols(cfg_.width));
  const nn::Tensor d_task = d_cat.leftCols(cfg_.task_features);
  return {d_task.data(), d_task.data() + d_task.size()};
}

void AccNetwork::zero_grad() {
  hist_.zero_grad();
  embed_.zero_grad();
  semantic_.zero_grad();
  head_.zero_grad();
}

void AccNetwork::collect(std::vector<nn::ParamRef>& out) {
  hist_.collect("acc.hist", out);
  embed_.collect("acc.embed", out);
  semantic_.collect("acc.semantic", out);
  out.push_back({"acc.head", head_.parameters(), head_.gradients(), {head_.in_dim() + 1, head_.out_dim()}});
}

namespace {

void check_pixels(double p_um, double p0_um) {
  if (!(p_um > 0.0) || !(p0_um > 0.0)) throw DomainError("rescale_for_pixel_size: pixel sizes must be positive");
}

}  // namespace

DynamicParams rescale_for_pixel_size(const DynamicParams& pred, double p_um, double p0_um) {
  check_pixels(p_um, p0_um);
  const double r = (p0_um * p0_um) / (p_um * p_um);
  const double g = pred.gain_linear();
  if (p_um * p_um > p0_um * p0_um) {
    const double gt = std::max(r * g, 1.0);
    return DynamicParams::from_linear_gain(r * pred.exposure_ms * g / gt, gt);
  }
  return {r * pred.exposure_ms, pred.gain_db};
}

std::array<double, 4> rescale_jacobian(const DynamicParams& pred, double p_um, double p0_um) {
  check_pixels(p_um, p0_um);
  const double r = (p0_um * p0_um) / (p_um * p_um);
  const double g = pred.gain_linear();
  if (p_um * p_um > p0_um * p0_um) {
    if (r * g >= 1.0) return {1.0, 0.0, 0.0, 1.0};
    // Gain floor: G_t = 1, E_t = r·E·g(G_dB).
    return {r * g, r * pred.exposure_ms * g * std::log(10.0) / 20.0, 0.0, 0.0};
  }
  return {r, 0.0, 0.0, 1.0};
}

DynamicParams average_ae_step(AverageAeState& state, const Image& img, int white_level) {
  if (img.empty()) throw DomainError("average_ae_step: empty image");
  const double mean = img.mean();
  DynamicParams next;
  if (mean > 0.0) {
    const double root = std::sqrt(0.5 * white_level / mean);
    next = DynamicParams::from_linear_gain(state.current.exposure_ms * root, state.current.gain_linear() * root);
  } else {
    ++state.zero_mean_events;
    next = {kExposureMaxMs, kGainMaxDb};
  }
  state.current = next.clamped();
  return state.current;
}

}  // namespace camco
