#include "camco/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "camco/errors.hpp"
#include "camco/rng.hpp"
#include "json.hpp"

namespace camco::nn {

DenseLayer::DenseLayer(int in_dim, int out_dim, Activation act, std::uint64_t seed)
    : in_(in_dim), out_(out_dim), act_(act) {
  if (in_dim <= 0 || out_dim <= 0) throw ShapeError("dense layer dimensions must be positive");
  theta_.assign(static_cast<std::size_t>(in_ * out_ + out_), 0.0);
  grad_.assign(theta_.size(), 0.0);
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / (in_ + out_));
  for (int i = 0; i < in_ * out_; ++i) theta_[i] = uniform(rng, -limit, limit);
}

namespace {

void activate(Tensor& z, Activation act) {
  switch (act) {
    case Activation::Identity: break;
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Sigmoid: z = (1.0 + (-z.array()).exp()).inverse().matrix(); break;
  }
}

}  // namespace

Tensor DenseLayer::infer(const Tensor& x) const {
  if (x.cols() != in_) {
    throw ShapeError("dense layer expects " + std::to_string(in_) + " inputs, got " + std::to_string(x.cols()));
  }
  Tensor z = x * weights();
  z.rowwise() += bias();
  activate(z, act_);
  return z;
}

const Tensor& DenseLayer::forward(const Tensor& x) {
  y_cache_ = infer(x);
  x_cache_ = x;
  has_cache_ = true;
  return y_cache_;
}

Tensor DenseLayer::backward(const Tensor& dy) {
  if (!has_cache_) throw StateError("backward called before forward");
  if (dy.rows() != y_cache_.rows() || dy.cols() != out_) throw ShapeError("dense layer: gradient shape mismatch");
  Tensor dz;
  switch (act_) {
    case Activation::Identity: dz = dy; break;
    case Activation::Relu: dz = (y_cache_.array() > 0.0).select(dy, 0.0); break;
    case Activation::Sigmoid: dz = (dy.array() * y_cache_.array() * (1.0 - y_cache_.array())).matrix(); break;
  }
  Eigen::Map<Eigen::MatrixXd> dw(grad_.data(), in_, out_);
  Eigen::Map<Eigen::RowVectorXd> db(grad_.data() + in_ * out_, out_);
  dw.noalias() += x_cache_.transpose() * dz;
  db += dz.colwise().sum();
  return dz * weights().transpose();
}

void DenseLayer::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

Mlp::Mlp(int in_dim, const std::vector<LayerSpec>& layers, std::uint64_t seed) {
  if (layers.empty()) throw ShapeError("mlp needs at least one layer");
  int in = in_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers_.emplace_back(in, layers[i].out_dim, layers[i].act, derive_seed(seed, {i}));
    in = layers[i].out_dim;
  }
}

const Tensor& Mlp::forward(const Tensor& x) {
  const Tensor* cur = &x;
  for (auto& l : layers_) cur = &l.forward(*cur);
  return *cur;
}

Tensor Mlp::infer(const Tensor& x) const {
  Tensor cur = x;
  for (const auto& l : layers_) cur = l.infer(cur);
  return cur;
}

Tensor Mlp::backward(const Tensor& dy) {
  Tensor g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
  return g;
}

void Mlp::zero_grad() {
  for (auto& l : layers_) l.zero_grad();
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.parameters().size();
  return n;
}

void Mlp::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& l = layers_[i];
    out.push_back({prefix + "." + std::to_string(i), l.parameters(), l.gradients(),
                   {l.in_dim() + 1, l.out_dim()}});
  }
}

AdamOptimizer::AdamOptimizer(AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
}

void AdamOptimizer::step(std::span<const ParamRef> params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: parameter layout changed between steps");
  ++t_;
  const double lr = cfg_.learning_rate;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto value = params[k].value;
    auto grad = params[k].grad;
    auto& m = m_[k];
    auto& v = v_[k];
    if (m.size() != value.size()) throw ShapeError("adam: parameter block resized");
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      if (cfg_.weight_decay > 0.0) value[i] *= 1.0 - lr * cfg_.weight_decay;
      value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.epsilon);
    }
  }
}

int multiscale_histogram_size(int bins, int scales) {
  int regions = 0;
  for (int l = 0; l < scales; ++l) regions += 1 << (2 * l);
  return regions * bins;
}

std::vector<double> multiscale_histogram(const Image& img, int bins, int scales, double white_level) {
  if (img.empty()) throw DomainError("multiscale_histogram: empty image");
  if (bins < 2 || scales < 1) throw ConfigError("multiscale_histogram: need bins >= 2 and scales >= 1");
  // Histogram the finest level once, then sum children into parents.
  const int finest = scales - 1;
  const int side = 1 << finest;
  std::vector<double> fine(static_cast<std::size_t>(side * side * bins), 0.0);
  const double to_bin = bins / white_level;
  for (int y = 0; y < img.height; ++y) {
    const int ry = std::min(side - 1, y * side / img.height);
    for (int x = 0; x < img.width; ++x) {
      const int rx = std::min(side - 1, x * side / img.width);
      const int b = std::clamp(static_cast<int>(img.at(x, y) * to_bin), 0, bins - 1);
      fine[static_cast<std::size_t>((ry * side + rx) * bins + b)] += 1.0;
    }
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(multiscale_histogram_size(bins, scales)));
  for (int l = 0; l < scales; ++l) {
    const int n = 1 << l;
    const int step = side / n;
    for (int ry = 0; ry < n; ++ry) {
      for (int rx = 0; rx < n; ++rx) {
        std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
        for (int fy = ry * step; fy < (ry + 1) * step; ++fy) {
          for (int fx = rx * step; fx < (rx + 1) * step; ++fx) {
            for (int b = 0; b < bins; ++b) h[b] += fine[static_cast<std::size_t>((fy * side + fx) * bins + b)];
          }
        }
        double total = 0.0;
        for (double c : h) total += c;
        // A region can be empty on images narrower than the quadtree; it is
        // then reported as uniform so every histogram still sums to one.
        for (double c : h) out.push_back(total > 0.0 ? c / total : 1.0 / bins);
      }
    }
  }
  return out;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, std::span<const ParamRef> params) {
  nlohmann::ordered_json manifest;
  manifest["format"] = "f64-le";
  manifest["tensors"] = nlohmann::ordered_json::array();
  std::ofstream bin(with_suffix(stem, ".bin"), std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write checkpoint " + stem.string());
  std::size_t offset = 0;
  for (const auto& p : params) {
    for (double v : p.value) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      unsigned char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
      bin.write(reinterpret_cast<const char*>(bytes), 8);
    }
    manifest["tensors"].push_back({{"name", p.name}, {"shape", p.shape}, {"offset", offset},
                                   {"count", p.value.size()}});
    offset += p.value.size();
  }
  manifest["total"] = offset;
  std::ofstream js(with_suffix(stem, ".json"));
  js << manifest.dump(2) << '\n';
}

void load_checkpoint(const std::filesystem::path& stem, std::span<const ParamRef> params) {
  std::ifstream js(with_suffix(stem, ".json"));
  if (!js) throw ConfigError("cannot read checkpoint manifest " + stem.string() + ".json");
  const auto manifest = nlohmann::json::parse(js);
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != params.size()) throw ShapeError("checkpoint has a different number of tensors");
  std::ifstream bin(with_suffix(stem, ".bin"), std::ios::binary);
  if (!bin) throw ConfigError("cannot read checkpoint " + stem.string() + ".bin");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& t = tensors[k];
    if (t.at("name").get<std::string>() != params[k].name ||
        t.at("count").get<std::size_t>() != params[k].value.size()) {
      throw ShapeError("checkpoint tensor " + std::to_string(k) + " does not match the network");
    }
    bin.seekg(static_cast<std::streamoff>(t.at("offset").get<std::size_t>() * 8));
    for (double& v : params[k].value) {
      unsigned char bytes[8];
      if (!bin.read(reinterpret_cast<char*>(bytes), 8)) throw ShapeError("checkpoint truncated");
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
      v = std::bit_cast<double>(bits);
    }
  }
}

}  // namespace camco::nn
