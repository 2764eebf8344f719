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

// Proximal policy optimization for the gate-control environment.
//
// The policy is a tanh MLP producing a Gaussian mean in pre-squash space
// with a state-independent learned log-std; actions are the logistic squash
// of the Gaussian sample, so every mean lies in [0, 1]^5. The value function
// is a separate MLP. Robustness comes from one of two regularizers:
// multiplicative Gaussian noise on the Ω̃/Δ̃ action channels, or inverted
// dropout on the policy's hidden units.

#pragma once

#include "qgrl/control_env.hpp"
#include "qgrl/nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgrl::ppo {

using nn::Mat;
using nn::Mode;
using nn::Rng;
using nn::Vec;
using env::Action;
using env::kActionDim;
using env::kObservationDim;
using env::Observation;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_shape(const std::vector<int>& s) {
  std::string out;
  for (std::size_t k = 0; k < s.size(); ++k) out += (k ? "," : "") + std::to_string(s[k]);
  return out;
}

struct RegularizerSpec {
  enum class Kind { None, OutputPerturbation, Dropout };
  Kind kind = Kind::None;
  double sigma = 0.1;  // output perturbation std
  double kappa = 0.1;  // dropout rate

  void validate() const {
    if (!(sigma >= 0.0)) throw std::invalid_argument("perturb_sigma must be non-negative");
    if (!(kappa >= 0.0 && kappa < 1.0)) throw std::invalid_argument("dropout_rate must lie in [0, 1)");
  }

  bool dropout_active() const { return kind == Kind::Dropout && kappa > 0.0; }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
      case Kind::None: return "none";
      case Kind::OutputPerturbation: os << "perturb(" << sigma << ")"; return os.str();
      case Kind::Dropout: os << "dropout(" << kappa << ")"; return os.str();
    }
    return "none";
  }
};

struct PolicyParams {
  nn::Mlp policy;  // 38 → hidden… → 5 (pre-squash means)
  nn::Mlp value;   // 38 → hidden… → 1
  Vec log_std = Vec::Zero(kActionDim);

  bool operator==(const PolicyParams&) const = default;

  static PolicyParams create(const std::vector<int>& hidden, Rng& rng, double init_log_std = -0.5) {
    std::vector<int> ps{kObservationDim};
    ps.insert(ps.end(), hidden.begin(), hidden.end());
    std::vector<int> vs = ps;
    ps.push_back(kActionDim);
    vs.push_back(1);
    PolicyParams p;
    p.policy = nn::Mlp::glorot(ps, rng, 0.01);
    p.value = nn::Mlp::glorot(vs, rng, 1.0);
    p.log_std = Vec::Constant(kActionDim, init_log_std);
    return p;
  }

  PolicyParams zeros_like() const {
    PolicyParams z;
    z.policy = policy.zeros_like();
    z.value = value.zeros_like();
    z.log_std = Vec::Zero(log_std.size());
    return z;
  }

  /// Blocks in checkpoint order: policy layers, log-std, value layers.
  template <typename F>
  void for_each_block(F&& f) {
    nn::for_each_block(policy, f);
    f(log_std.data(), static_cast<std::size_t>(log_std.size()));
    nn::for_each_block(value, f);
  }
  template <typename F>
  void for_each_block(F&& f) const {
    const_cast<PolicyParams*>(this)->for_each_block(
        [&](double* p, std::size_t n) { f(static_cast<const double*>(p), n); });
  }

  std::size_t parameter_count() const {
    return policy.parameter_count() + value.parameter_count() + static_cast<std::size_t>(log_std.size());
  }

  Vec flatten() const {
    Vec out(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    for_each_block([&](const double* p, std::size_t n) {
      out.segment(at, static_cast<Eigen::Index>(n)) = Eigen::Map<const Vec>(p, static_cast<Eigen::Index>(n));
      at += static_cast<Eigen::Index>(n);
    });
    return out;
  }

  void assign(const Vec& flat) {
    if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
      throw ShapeError("PolicyParams::assign: flat vector has wrong length");
    }
    Eigen::Index at = 0;
    for_each_block([&](double* p, std::size_t n) {
      Eigen::Map<Vec>(p, static_cast<Eigen::Index>(n)) = flat.segment(at, static_cast<Eigen::Index>(n));
      at += static_cast<Eigen::Index>(n);
    });
  }

  bool all_finite() const { return flatten().allFinite(); }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ½ log 2π

/// log π(a) for a = sigmoid(u), u ~ N(μ, σ²), including the squash Jacobian.
inline double squashed_log_prob(std::span<const double> u, std::span<const double> mu,
                                const Vec& log_std) {
  double lp = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double ls = log_std(static_cast<Eigen::Index>(k));
    const double z = (u[k] - mu[k]) * std::exp(-ls);
    lp += -0.5 * z * z - ls - kHalfLog2Pi;
    lp += softplus(-u[k]) + softplus(u[k]);  // −log(a(1−a))
  }
  return lp;
}

struct PolicyOutput {
  Action mean{};      // squashed, in [0, 1]
  Action pre_mean{};  // Gaussian mean before the squash
  Action stddev{};    // pre-squash standard deviation
  double value = 0.0;
};

/// Dropout masks for one observation, concatenated over hidden layers.
inline nn::DropoutMasks sample_masks(const nn::Mlp& net, double kappa, Rng& rng, Eigen::Index cols = 1) {
  nn::DropoutMasks masks;
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    masks.push_back(nn::dropout_mask(net.layers[k].W.rows(), cols, kappa, rng));
  }
  return masks;
}

inline void check_input(const PolicyParams& p, std::size_t obs_len) {
  const auto in = static_cast<std::size_t>(p.policy.layers.front().W.cols());
  if (in != obs_len || static_cast<std::size_t>(p.value.layers.front().W.cols()) != obs_len) {
    throw ShapeError("observation length " + std::to_string(obs_len) + " does not match network input " +
                     std::to_string(in));
  }
  if (p.policy.layers.back().W.rows() != kActionDim || p.value.layers.back().W.rows() != 1 ||
      p.log_std.size() != kActionDim) {
    throw ShapeError("network heads do not match action dimension " + std::to_string(kActionDim));
  }
}

/// Policy and value heads for one observation. In train mode with dropout
/// the hidden activations are masked; the masks used are written to
/// `masks_out` when given.
inline PolicyOutput policy_forward(std::span<const double> obs, const PolicyParams& p,
                                   const RegularizerSpec& reg, Mode mode, Rng& rng,
                                   nn::DropoutMasks* masks_out = nullptr) {
  check_input(p, obs.size());
  const Mat x = Eigen::Map<const Vec>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  nn::DropoutMasks masks;
  if (mode == Mode::Train && reg.dropout_active()) masks = sample_masks(p.policy, reg.kappa, rng);
  const Mat mu = nn::forward(p.policy, x, masks, nullptr);
  const Mat v = nn::forward(p.value, x, {}, nullptr);
  PolicyOutput out;
  for (int k = 0; k < kActionDim; ++k) {
    out.pre_mean[static_cast<std::size_t>(k)] = mu(k, 0);
    out.mean[static_cast<std::size_t>(k)] = sigmoid(mu(k, 0));
    out.stddev[static_cast<std::size_t>(k)] = std::exp(p.log_std(k));
  }
  out.value = v(0, 0);
  if (masks_out) *masks_out = std::move(masks);
  return out;
}

inline PolicyOutput policy_forward(const Observation& obs, const PolicyParams& p,
                                   const RegularizerSpec& reg, Mode mode, Rng& rng,
                                   nn::DropoutMasks* masks_out = nullptr) {
  return policy_forward(std::span<const double>(obs), p, reg, mode, rng, masks_out);
}

using nn::apply_dropout;

/// Ω̃, Δ̃ channels (0..3) scaled by independent 1 + N(0, σ), then clamped;
/// the coupling channel is never touched.
inline Action perturb_action(const Action& a, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("perturb_action: sigma must be non-negative");
  if (sigma == 0.0) return a;
  std::normal_distribution<double> noise(0.0, sigma);
  Action out = a;
  for (std::size_t k = 0; k < 4; ++k) out[k] = std::clamp(a[k] * (1.0 + noise(rng)), 0.0, 1.0);
  return out;
}

struct Trajectory {
  std::vector<Observation> observations;
  std::vector<Action> actions;  // pre-squash Gaussian samples
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<Vec> masks;  // concatenated hidden masks; empty without dropout

  std::size_t size() const { return rewards.size(); }

  void validate() const {
    const std::size_t n = rewards.size();
    if (observations.size() != n || actions.size() != n || log_probs.size() != n ||
        values.size() != n || dones.size() != n || (!masks.empty() && masks.size() != n)) {
      throw ShapeError("trajectory fields have unequal lengths");
    }
  }

  void append(const Trajectory& o) {
    auto cat = [](auto& a, const auto& b) { a.insert(a.end(), b.begin(), b.end()); };
    cat(observations, o.observations);
    cat(actions, o.actions);
    cat(log_probs, o.log_probs);
    cat(rewards, o.rewards);
    cat(values, o.values);
    cat(dones, o.dones);
    cat(masks, o.masks);
  }
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// Generalized advantage estimation; the value after a done step is 0, the
/// value after the buffer end is `last_value`.
inline Advantages compute_gae(const Trajectory& traj, double gamma, double lambda,
                              double last_value = 0.0) {
  traj.validate();
  const std::size_t n = traj.size();
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = last_value;
  for (std::size_t k = n; k-- > 0;) {
    const double live = traj.dones[k] ? 0.0 : 1.0;
    const double delta = traj.rewards[k] + gamma * next_value * live - traj.values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + traj.values[k];
    next_value = traj.values[k];
  }
  return out;
}

struct PpoConfig {
  int batch_size = 64;  // episodes per update
  double learning_rate = 1e-4;
  double clip_ratio = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  int update_epochs = 10;
  int minibatch_size = 64;
  long max_episodes = 100000;
  std::uint64_t seed = 0;
  bool stop_on_threshold = true;
  double halt_fidelity = 0.0;  // 0 uses the environment threshold
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;  // 0 disables global-norm clipping
  std::vector<int> hidden_layers{64, 64};
  double init_log_std = -0.5;

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
    if (batch_size < 1) fail("batch_size: must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate: must be positive");
    if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) fail("clip_ratio: must lie in (0, 1)");
    if (!(discount >= 0.0 && discount <= 1.0)) fail("discount: must lie in [0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda: must lie in [0, 1]");
    if (update_epochs < 1) fail("update_epochs: must be >= 1");
    if (minibatch_size < 1) fail("minibatch_size: must be >= 1");
    if (max_episodes < 0) fail("max_episodes: must be >= 0");
    if (!(max_grad_norm >= 0.0)) fail("max_grad_norm: must be non-negative");
    if (hidden_layers.empty()) fail("hidden_layers: need at least one hidden layer");
    for (int h : hidden_layers)
      if (h < 1) fail("hidden_layers: sizes must be positive");
  }
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double mean_ratio = 0.0;
};

/// PPO loss on the samples `idx` of `traj`, with gradient accumulated into
/// `grad` (same shapes as `p`) when given:
///   L = −mean min(ρA, clip(ρ, 1±ε)A) + c_v mean (V − R)² − c_e H[π].
inline LossTerms ppo_loss(const PolicyParams& p, const Trajectory& traj,
                          std::span<const std::size_t> idx, std::span<const double> adv,
                          std::span<const double> ret, const PpoConfig& cfg,
                          PolicyParams* grad = nullptr) {
  const auto batch = static_cast<Eigen::Index>(idx.size());
  if (batch == 0) throw ShapeError("ppo_loss: empty minibatch");
  Mat x(kObservationDim, batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    x.col(c) = Eigen::Map<const Vec>(traj.observations[idx[static_cast<std::size_t>(c)]].data(), kObservationDim);
  }
  nn::DropoutMasks masks;
  if (!traj.masks.empty()) {
    Eigen::Index offset = 0;
    for (std::size_t k = 0; k + 1 < p.policy.layers.size(); ++k) {
      const Eigen::Index rows = p.policy.layers[k].W.rows();
      Mat m(rows, batch);
      for (Eigen::Index c = 0; c < batch; ++c) {
        m.col(c) = traj.masks[idx[static_cast<std::size_t>(c)]].segment(offset, rows);
      }
      masks.push_back(std::move(m));
      offset += rows;
    }
  }
  nn::ForwardCache pcache, vcache;
  const Mat mu = nn::forward(p.policy, x, masks, grad ? &pcache : nullptr);
  const Mat v = nn::forward(p.value, x, {}, grad ? &vcache : nullptr);

  const Vec inv_var = (-2.0 * p.log_std).array().exp();
  Mat dmu = Mat::Zero(kActionDim, batch);
  Vec dlogstd = Vec::Zero(kActionDim);
  Mat dv(1, batch);
  LossTerms out;
  const double inv_b = 1.0 / static_cast<double>(batch);
  const double eps = cfg.clip_ratio;
  for (Eigen::Index c = 0; c < batch; ++c) {
    const std::size_t i = idx[static_cast<std::size_t>(c)];
    const auto& u = traj.actions[i];
    const double lp = squashed_log_prob(u, std::span<const double>(mu.col(c).data(), kActionDim), p.log_std);
    const double log_ratio = lp - traj.log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double a = adv[static_cast<std::size_t>(c)];
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    const bool unclipped_active = ratio * a <= clipped * a;
    out.policy -= std::min(ratio * a, clipped * a) * inv_b;
    out.clip_fraction += (std::abs(ratio - 1.0) > eps ? 1.0 : 0.0) * inv_b;
    out.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;
    out.mean_ratio += ratio * inv_b;
    const double verr = v(0, c) - ret[static_cast<std::size_t>(c)];
    out.value += cfg.value_coef * verr * verr * inv_b;
    dv(0, c) = cfg.value_coef * 2.0 * verr * inv_b;
    if (unclipped_active) {
      const double dlp = -a * ratio * inv_b;
      for (int k = 0; k < kActionDim; ++k) {
        const double diff = u[static_cast<std::size_t>(k)] - mu(k, c);
        dmu(k, c) = dlp * diff * inv_var(k);
        dlogstd(k) += dlp * (diff * diff * inv_var(k) - 1.0);
      }
    }
  }
  out.entropy = (p.log_std.array() + 0.5 + kHalfLog2Pi).sum();
  out.total = out.policy + out.value - cfg.entropy_coef * out.entropy;
  if (!std::isfinite(out.total)) {
    std::ostringstream os;
    os << "non-finite PPO loss: policy=" << out.policy << " value=" << out.value
       << " entropy=" << out.entropy << " mean_ratio=" << out.mean_ratio;
    throw NonFiniteLoss(os.str());
  }
  if (grad) {
    nn::backward(p.policy, pcache, masks, dmu, grad->policy);
    nn::backward(p.value, vcache, {}, dv, grad->value);
    grad->log_std += dlogstd - Vec::Constant(kActionDim, cfg.entropy_coef);
  }
  return out;
}

struct UpdateStats {
  LossTerms first;  // loss on the first minibatch of the first epoch
  LossTerms last;
  double final_approx_kl = 0.0;
  int gradient_steps = 0;
};

/// Normalizes advantages to zero mean and unit variance.
inline std::vector<double> normalize(std::vector<double> a) {
  if (a.empty()) return a;
  const double n = static_cast<double>(a.size());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / n);
  for (double& x : a) x = sd > 1e-12 ? (x - mean) / sd : x - mean;
  return a;
}

/// update_epochs passes of shuffled minibatches of clipped-surrogate descent.
inline UpdateStats ppo_update(const Trajectory& batch, const Advantages& gae, PolicyParams& p,
                              nn::Adam& opt, const PpoConfig& cfg, Rng& rng) {
  batch.validate();
  if (batch.size() == 0) throw ShapeError("ppo_update: empty batch");
  if (gae.advantages.size() != batch.size()) throw ShapeError("ppo_update: advantage length mismatch");
  const std::vector<double> adv = normalize(gae.advantages);
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  UpdateStats stats;
  Vec flat = p.flatten();
  std::vector<std::size_t> idx;
  std::vector<double> a, r;
  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.minibatch_size));
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
      a.resize(idx.size());
      r.resize(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) {
        a[k] = adv[idx[k]];
        r[k] = gae.returns[idx[k]];
      }
      PolicyParams g = p.zeros_like();
      const LossTerms lt = ppo_loss(p, batch, idx, a, r, cfg, &g);
      if (stats.gradient_steps == 0) stats.first = lt;
      stats.last = lt;
      Vec gflat = g.flatten();
      if (cfg.max_grad_norm > 0.0) {
        const double norm = gflat.norm();
        if (norm > cfg.max_grad_norm) gflat *= cfg.max_grad_norm / norm;
      }
      opt.step(flat, gflat);
      p.assign(flat);
      ++stats.gradient_steps;
    }
  }
  stats.final_approx_kl = stats.last.approx_kl;
  return stats;
}

/// Deterministic per-episode seed so rollouts are reproducible in any order.
inline std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + episode + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct EpisodeResult {
  double total_reward = 0.0;
  double fidelity = 0.0;
  std::vector<env::PhysicalControls> controls;
  std::vector<Action> actions;  // applied normalized actions
};

/// Mean-action rollout with every regularizer off and no error offsets.
inline EpisodeResult run_deterministic_episode(const PolicyParams& p, env::EnvConfig cfg) {
  cfg.errors = {};
  env::ControlEnv e(cfg);
  Observation obs = e.reset();
  Rng unused(0);
  EpisodeResult res;
  const RegularizerSpec none{};
  for (;;) {
    const PolicyOutput o = policy_forward(obs, p, none, Mode::Eval, unused);
    const auto t = e.state().step * cfg.dt();
    res.controls.push_back(env::to_physical(o.mean, t, cfg));
    res.actions.push_back(o.mean);
    const auto step = e.step(o.mean);
    res.total_reward += step.reward;
    res.fidelity = step.fidelity;
    obs = step.observation;
    if (step.done) break;
  }
  return res;
}

/// One stochastic training episode appended to `traj`.
inline EpisodeResult collect_episode(const PolicyParams& p, const RegularizerSpec& reg,
                                     env::ControlEnv& e, Rng& rng, Trajectory& traj) {
  Observation obs = e.reset();
  EpisodeResult res;
  std::normal_distribution<double> gauss(0.0, 1.0);
  const bool dropout = reg.dropout_active();
  for (;;) {
    nn::DropoutMasks masks;
    const PolicyOutput o = policy_forward(obs, p, reg, Mode::Train, rng, dropout ? &masks : nullptr);
    Action u{};
    Action a{};
    for (std::size_t k = 0; k < static_cast<std::size_t>(kActionDim); ++k) {
      u[k] = o.pre_mean[k] + o.stddev[k] * gauss(rng);
      a[k] = sigmoid(u[k]);
    }
    if (reg.kind == RegularizerSpec::Kind::OutputPerturbation) a = perturb_action(a, reg.sigma, rng);
    const auto step = e.step(a);
    traj.observations.push_back(obs);
    traj.actions.push_back(u);
    traj.log_probs.push_back(squashed_log_prob(u, o.pre_mean, p.log_std));
    traj.rewards.push_back(step.reward);
    traj.values.push_back(o.value);
    traj.dones.push_back(step.done ? 1 : 0);
    if (dropout) {
      Vec cat(p.policy.hidden_units());
      Eigen::Index at = 0;
      for (const auto& m : masks) {
        cat.segment(at, m.rows()) = m.col(0);
        at += m.rows();
      }
      traj.masks.push_back(std::move(cat));
    }
    res.total_reward += step.reward;
    res.fidelity = step.fidelity;
    obs = step.observation;
    if (step.done) break;
  }
  return res;
}

struct EpisodeRecord {
  long episode = 0;
  double reward = 0.0;
  double fidelity = 0.0;
};

struct UpdateRecord {
  long episodes_seen = 0;
  double eval_fidelity = 0.0;
  double eval_reward = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct TrainingLog {
  std::vector<EpisodeRecord> episodes;
  std::vector<UpdateRecord> updates;
  double best_eval_fidelity = 0.0;
  bool halted_on_threshold = false;
};

struct TrainResult {
  PolicyParams params;
  TrainingLog log;
};

/// Called after each update; returning false stops training.
using ProgressCallback = std::function<bool(const UpdateRecord&)>;

inline PolicyParams initial_params(const PpoConfig& cfg) {
  Rng rng(cfg.seed);
  return PolicyParams::create(cfg.hidden_layers, rng, cfg.init_log_std);
}

/// Collects batch_size episodes per update until max_episodes, or until an
/// evaluation episode (regularizers off) reaches the halt fidelity when
/// stop_on_threshold is set. Rollouts are sequential and every random draw
/// derives from cfg.seed, so identical inputs give identical logs.
inline TrainResult train(const env::EnvConfig& env_cfg, const PpoConfig& cfg,
                         const RegularizerSpec& reg, const ProgressCallback& progress = {}) {
  env_cfg.validate();
  cfg.validate();
  reg.validate();
  TrainResult res;
  res.params = initial_params(cfg);
  if (cfg.max_episodes == 0) return res;
  Rng update_rng(episode_seed(cfg.seed, ~std::uint64_t{0}));
  nn::Adam opt(res.params.parameter_count(), nn::AdamConfig{cfg.learning_rate});
  env::ControlEnv e(env_cfg);
  const double halt = cfg.halt_fidelity > 0.0 ? cfg.halt_fidelity : env_cfg.fidelity_threshold;
  long episode = 0;
  while (episode < cfg.max_episodes) {
    Trajectory batch;
    const long n = std::min<long>(cfg.batch_size, cfg.max_episodes - episode);
    for (long k = 0; k < n; ++k, ++episode) {
      Rng rng(episode_seed(cfg.seed, static_cast<std::uint64_t>(episode)));
      const auto ep = collect_episode(res.params, reg, e, rng, batch);
      res.log.episodes.push_back({episode, ep.total_reward, ep.fidelity});
    }
    const Advantages gae = compute_gae(batch, cfg.discount, cfg.gae_lambda);
    const UpdateStats st = ppo_update(batch, gae, res.params, opt, cfg, update_rng);
    if (!res.params.all_finite()) throw NonFiniteLoss("parameters became non-finite after update");

    const EpisodeResult ev = run_deterministic_episode(res.params, env_cfg);
    UpdateRecord rec{episode, ev.fidelity, ev.total_reward, st.last.policy, st.last.value,
                     st.final_approx_kl, st.last.clip_fraction};
    res.log.updates.push_back(rec);
    res.log.best_eval_fidelity = std::max(res.log.best_eval_fidelity, ev.fidelity);
    if (progress && !progress(rec)) break;
    if (cfg.stop_on_threshold && ev.fidelity >= halt) {
      res.log.halted_on_threshold = true;
      break;
    }
  }
  return res;
}

}  // namespace qgrl::ppo
