// Copyright 2026 The qgrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal feed-forward networks with manual backpropagation, inverted
// dropout and the Adam optimizer. Batches are stored column-wise
// (features × samples).

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgrl::nn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

enum class Mode { Train, Eval };

struct Layer {
  Mat W;  // out × in
  Vec b;
  bool operator==(const Layer& o) const { return W == o.W && b == o.b; }
};

/// tanh hidden layers, linear output layer.
struct Mlp {
  std::vector<Layer> layers;

  bool operator==(const Mlp&) const = default;

  std::vector<int> sizes() const {
    std::vector<int> s;
    if (layers.empty()) return s;
    s.push_back(static_cast<int>(layers.front().W.cols()));
    for (const auto& l : layers) s.push_back(static_cast<int>(l.W.rows()));
    return s;
  }

  int hidden_units() const {
    int n = 0;
    for (std::size_t k = 0; k + 1 < layers.size(); ++k) n += static_cast<int>(layers[k].W.rows());
    return n;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
    return n;
  }

  /// Glorot-uniform weights, zero biases; the output layer is scaled by
  /// `output_gain`.
  static Mlp glorot(const std::vector<int>& sizes, Rng& rng, double output_gain = 1.0) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output size");
    Mlp m;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
      const int in = sizes[k];
      const int out = sizes[k + 1];
      if (in < 1 || out < 1) throw std::invalid_argument("Mlp layer sizes must be positive");
      const double limit = std::sqrt(6.0 / (in + out)) * (k + 2 == sizes.size() ? output_gain : 1.0);
      std::uniform_real_distribution<double> u(-limit, limit);
      Layer l{Mat(out, in), Vec::Zero(out)};
      for (Eigen::Index r = 0; r < l.W.rows(); ++r)
        for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = u(rng);
      m.layers.push_back(std::move(l));
    }
    return m;
  }

  Mlp zeros_like() const {
    Mlp z;
    for (const auto& l : layers) z.layers.push_back({Mat::Zero(l.W.rows(), l.W.cols()), Vec::Zero(l.b.size())});
    return z;
  }
};

/// Activations kept for the backward pass.
struct ForwardCache {
  std::vector<Mat> inputs;       // input to each layer
  std::vector<Mat> activations;  // tanh output before masking, hidden layers
};

/// Per-hidden-layer multipliers (0 or 1/(1−κ)); empty means no dropout.
using DropoutMasks = std::vector<Mat>;

inline Mat forward(const Mlp& net, const Mat& x, const DropoutMasks& masks, ForwardCache* cache) {
  Mat a = x;
  if (cache) {
    cache->inputs.clear();
    cache->activations.clear();
  }
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    if (cache) cache->inputs.push_back(a);
    Mat z = l.W * a;
    z.colwise() += l.b;
    if (k + 1 == net.layers.size()) return z;
    Mat h = z.array().tanh().matrix();
    if (cache) cache->activations.push_back(h);
    if (!masks.empty()) h.array() *= masks[k].array();
    a = std::move(h);
  }
  return a;
}

/// Accumulates parameter gradients into `grad` given dL/d(output).
inline void backward(const Mlp& net, const ForwardCache& cache, const DropoutMasks& masks,
                     Mat upstream, Mlp& grad) {
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const auto& l = net.layers[k];
    grad.layers[k].W.noalias() += upstream * cache.inputs[k].transpose();
    grad.layers[k].b += upstream.rowwise().sum();
    if (k == 0) break;
    Mat da = l.W.transpose() * upstream;
    const Mat& h = cache.activations[k - 1];
    Mat dz = da.array() * (1.0 - h.array().square());
    if (!masks.empty()) dz.array() *= masks[k - 1].array();
    upstream = std::move(dz);
  }
}

/// Inverted-dropout multipliers: 0 with probability κ, else 1/(1−κ).
inline Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double kappa, Rng& rng) {
  if (!(kappa >= 0.0 && kappa < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  Mat m(rows, cols);
  if (kappa == 0.0) {
    m.setOnes();
    return m;
  }
  std::bernoulli_distribution drop(kappa);
  const double keep_scale = 1.0 / (1.0 - kappa);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = drop(rng) ? 0.0 : keep_scale;
  return m;
}

inline Vec apply_dropout(const Vec& activations, double kappa, Mode mode, Rng& rng) {
  if (!(kappa >= 0.0 && kappa < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (mode == Mode::Eval || kappa == 0.0) return activations;
  return activations.cwiseProduct(dropout_mask(activations.size(), 1, kappa, rng).col(0));
}

/// Visits parameter blocks in a fixed order (W then b, layer by layer).
template <typename Net, typename F>
void for_each_block(Net& net, F&& f) {
  for (auto& l : net.layers) {
    f(l.W.data(), static_cast<std::size_t>(l.W.size()));
    f(l.b.data(), static_cast<std::size_t>(l.b.size()));
  }
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(Vec::Zero(static_cast<Eigen::Index>(n))), v_(m_) {}

  void step(Vec& params, const Vec& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
      throw std::invalid_argument("Adam::step: size mismatch");
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -= cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
  }

  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  Vec m_, v_;
  long t_ = 0;
};

}  // namespace qgrl::nn
