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

// Binary policy checkpoints.
//
// Layout (little-endian):
//   "QGRL"  magic, 4 bytes
//   u8      format version
//   u32     metadata length n
//   n bytes metadata, one key=value per line
//   f64[]   policy layers (W row-major, then b), log-std, value layers

#pragma once

#include "qgrl/hash.hpp"
#include "qgrl/ppo.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgrl::ckpt {

inline constexpr char kMagic[4] = {'Q', 'G', 'R', 'L'};
inline constexpr std::uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Metadata {
  std::vector<int> policy_layers;
  std::vector<int> value_layers;
  std::string regularizer = "none";
  long episodes = 0;
  std::string config_hash;

  bool operator==(const Metadata&) const = default;
};

struct Checkpoint {
  Metadata meta;
  ppo::PolicyParams params;
};

namespace detail {

inline std::vector<int> parse_shape(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw CheckpointError("corrupt checkpoint: bad layer shape '" + s + "'");
    }
  }
  if (out.size() < 2) throw CheckpointError("corrupt checkpoint: layer shape '" + s + "' too short");
  return out;
}

inline std::string encode_meta(const Metadata& m) {
  std::ostringstream os;
  os << "policy_layers=" << ppo::format_shape(m.policy_layers) << '\n'
     << "value_layers=" << ppo::format_shape(m.value_layers) << '\n'
     << "regularizer=" << m.regularizer << '\n'
     << "episodes=" << m.episodes << '\n'
     << "config_hash=" << m.config_hash << '\n';
  return os.str();
}

inline Metadata decode_meta(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("corrupt checkpoint: metadata line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const char* k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw CheckpointError(std::string("corrupt checkpoint: missing metadata key ") + k);
    return it->second;
  };
  Metadata m;
  m.policy_layers = parse_shape(need("policy_layers"));
  m.value_layers = parse_shape(need("value_layers"));
  m.regularizer = need("regularizer");
  try {
    m.episodes = std::stol(need("episodes"));
  } catch (const std::logic_error&) {
    throw CheckpointError("corrupt checkpoint: bad episode count");
  }
  m.config_hash = need("config_hash");
  return m;
}

inline ppo::PolicyParams shaped_params(const std::vector<int>& ps, const std::vector<int>& vs) {
  auto make = [](const std::vector<int>& s) {
    nn::Mlp net;
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      net.layers.push_back({nn::Mat::Zero(s[k + 1], s[k]), nn::Vec::Zero(s[k + 1])});
    }
    return net;
  };
  ppo::PolicyParams p;
  p.policy = make(ps);
  p.value = make(vs);
  p.log_std = nn::Vec::Zero(ps.back());
  return p;
}

}  // namespace detail

/// Serializes W blocks in row-major order.
inline void save(const std::string& path, const ppo::PolicyParams& p, Metadata meta) {
  meta.policy_layers = p.policy.sizes();
  meta.value_layers = p.value.sizes();
  const std::string text = detail::encode_meta(meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  const auto n = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  auto put = [&](const double* d, std::size_t len) {
    out.write(reinterpret_cast<const char*>(d), static_cast<std::streamsize>(len * sizeof(double)));
  };
  auto put_net = [&](const nn::Mlp& net) {
    for (const auto& l : net.layers) {
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = l.W;
      put(w.data(), static_cast<std::size_t>(w.size()));
      put(l.b.data(), static_cast<std::size_t>(l.b.size()));
    }
  };
  put_net(p.policy);
  put(p.log_std.data(), static_cast<std::size_t>(p.log_std.size()));
  put_net(p.value);
  if (!out) throw CheckpointError("write to '" + path + "' failed");
}

inline Checkpoint load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("'" + path + "' is not a checkpoint (bad magic)");
  }
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kVersion) + ")");
  }
  std::uint32_t n = 0;
  std::memcpy(&n, bytes.data() + 5, 4);
  if (bytes.size() < 9ull + n) throw CheckpointError("corrupt checkpoint: truncated metadata");
  Checkpoint ck;
  ck.meta = detail::decode_meta(bytes.substr(9, n));
  ck.params = detail::shaped_params(ck.meta.policy_layers, ck.meta.value_layers);
  const std::size_t expected = 9ull + n + ck.params.parameter_count() * sizeof(double);
  if (bytes.size() != expected) {
    throw CheckpointError("corrupt checkpoint: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(bytes.size()) + (bytes.size() < expected ? " (truncated)" : ""));
  }
  std::size_t at = 9ull + n;
  auto get = [&](double* d, std::size_t len) {
    std::memcpy(d, bytes.data() + at, len * sizeof(double));
    at += len * sizeof(double);
  };
  auto get_net = [&](nn::Mlp& net) {
    for (auto& l : net.layers) {
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(l.W.rows(), l.W.cols());
      get(w.data(), static_cast<std::size_t>(w.size()));
      l.W = w;
      get(l.b.data(), static_cast<std::size_t>(l.b.size()));
    }
  };
  get_net(ck.params.policy);
  get(ck.params.log_std.data(), static_cast<std::size_t>(ck.params.log_std.size()));
  get_net(ck.params.value);
  if (!ck.params.all_finite()) throw CheckpointError("corrupt checkpoint: non-finite parameters");
  return ck;
}

/// Loads a checkpoint and requires the given network shapes.
inline Checkpoint load_expecting(const std::string& path, const std::vector<int>& policy_layers,
                                 const std::vector<int>& value_layers) {
  Checkpoint ck = load(path);
  if (ck.meta.policy_layers != policy_layers || ck.meta.value_layers != value_layers) {
    throw ppo::ShapeError("checkpoint shape mismatch: expected policy " + ppo::format_shape(policy_layers) +
                          " / value " + ppo::format_shape(value_layers) + ", found policy " +
                          ppo::format_shape(ck.meta.policy_layers) + " / value " +
                          ppo::format_shape(ck.meta.value_layers));
  }
  return ck;
}

}  // namespace qgrl::ckpt
