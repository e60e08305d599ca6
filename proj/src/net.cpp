// Copyright 2026 The oswatch Authors
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

#include "oswatch/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "oswatch/error.hpp"
#include "oswatch/random.hpp"

namespace oswatch {
namespace {

constexpr char kOsamMagic[4] = {'O', 'S', 'A', 'M'};
constexpr std::uint32_t kOsamVersion = 1;

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename T>
void fill_glorot(Matrix<T>& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
  for (T& w : m.values) w = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
void check_same_shape(const BasicAdapterParams<T>& a, const BasicAdapterParams<T>& b,
                      const char* what) {
  if (a.w1.rows != b.w1.rows || a.w1.cols != b.w1.cols || a.w2.cols != b.w2.cols ||
      a.w3.cols != b.w3.cols) {
    throw ContractViolation(std::string(what) + ": parameter shapes differ");
  }
}

}  // namespace

template <typename T>
void check_shapes(const BasicAdapterParams<T>& p) {
  if (p.input_dim() == 0 || p.hidden1() == 0 || p.hidden2() == 0) {
    throw ContractViolation("adapter dimensions must be positive");
  }
  if (p.num_outputs() < 2) throw ContractViolation("adapter needs at least 2 outputs");
  if (p.w2.rows != p.hidden1() || p.w3.rows != p.hidden2() || p.b1.size() != p.hidden1() ||
      p.b2.size() != p.hidden2() || p.b3.size() != p.num_outputs() ||
      p.w1.values.size() != p.w1.rows * p.w1.cols ||
      p.w2.values.size() != p.w2.rows * p.w2.cols ||
      p.w3.values.size() != p.w3.rows * p.w3.cols) {
    throw ContractViolation("inconsistent adapter shapes: w1 " +
                            shape_str(p.w1.rows, p.w1.cols) + ", w2 " +
                            shape_str(p.w2.rows, p.w2.cols) + ", w3 " +
                            shape_str(p.w3.rows, p.w3.cols));
  }
}

template <typename T>
BasicAdapterParams<T> init_params(std::uint64_t seed, std::size_t d, std::size_t h1,
                                  std::size_t h2, std::size_t c) {
  BasicAdapterParams<T> p(d, h1, h2, c);
  check_shapes(p);
  Rng rng(seed);
  fill_glorot(p.w1, rng);
  fill_glorot(p.w2, rng);
  fill_glorot(p.w3, rng);
  return p;
}

template <typename T>
ForwardTrace<T> forward(const BasicAdapterParams<T>& p, std::span<const T> x) {
  if (x.size() != p.input_dim()) {
    throw ContractViolation("forward: input has length " + std::to_string(x.size()) +
                            ", adapter expects " + std::to_string(p.input_dim()));
  }
  ForwardTrace<T> t;
  t.input.assign(x.begin(), x.end());

  // Accumulate u^T W row by row in double.
  auto affine = [](const Matrix<T>& w, const std::vector<T>& b, std::span<const T> u,
                   std::vector<double>& acc) {
    acc.assign(b.begin(), b.end());
    for (std::size_t i = 0; i < w.rows; ++i) {
      const double ui = u[i];
      if (ui == 0.0) continue;
      const T* row = w.values.data() + i * w.cols;
      for (std::size_t j = 0; j < w.cols; ++j) acc[j] += ui * static_cast<double>(row[j]);
    }
  };

  std::vector<double> acc;
  affine(p.w1, p.b1, x, acc);
  t.h1.resize(acc.size());
  for (std::size_t j = 0; j < acc.size(); ++j) t.h1[j] = static_cast<T>(std::tanh(acc[j]));
  affine(p.w2, p.b2, t.h1, acc);
  t.h2.assign(acc.begin(), acc.end());
  affine(p.w3, p.b3, t.h2, acc);
  t.logits.assign(acc.begin(), acc.end());
  return t;
}

template <typename T>
void backward_accumulate(const BasicAdapterParams<T>& p, const ForwardTrace<T>& t,
                         std::span<const double> grad_logits, std::span<const double> grad_h2,
                         BasicParamGrads<double>& into) {
  const std::size_t d = p.input_dim(), n1 = p.hidden1(), n2 = p.hidden2(), c = p.num_outputs();
  if (grad_logits.size() != c || (!grad_h2.empty() && grad_h2.size() != n2) ||
      t.input.size() != d || t.h1.size() != n1 || t.h2.size() != n2) {
    throw ContractViolation("backward: trace or cotangent shape does not match the adapter");
  }
  if (into.w1.rows != d || into.w1.cols != n1 || into.w2.cols != n2 || into.w3.cols != c) {
    throw ContractViolation("backward: gradient buffer shape does not match the adapter");
  }

  // Output layer.
  std::vector<double> d_h2(n2, 0.0);
  for (std::size_t k = 0; k < c; ++k) into.b3[k] += grad_logits[k];
  for (std::size_t i = 0; i < n2; ++i) {
    const double hi = t.h2[i];
    const T* w = p.w3.values.data() + i * c;
    double* g = into.w3.values.data() + i * c;
    double back = grad_h2.empty() ? 0.0 : grad_h2[i];
    for (std::size_t k = 0; k < c; ++k) {
      g[k] += hi * grad_logits[k];
      back += static_cast<double>(w[k]) * grad_logits[k];
    }
    d_h2[i] = back;
  }

  // Second hidden layer (identity activation).
  std::vector<double> d_z1(n1, 0.0);
  for (std::size_t j = 0; j < n2; ++j) into.b2[j] += d_h2[j];
  for (std::size_t i = 0; i < n1; ++i) {
    const double hi = t.h1[i];
    const T* w = p.w2.values.data() + i * n2;
    double* g = into.w2.values.data() + i * n2;
    double back = 0.0;
    for (std::size_t j = 0; j < n2; ++j) {
      g[j] += hi * d_h2[j];
      back += static_cast<double>(w[j]) * d_h2[j];
    }
    d_z1[i] = back * (1.0 - hi * hi);
  }

  // First hidden layer.
  for (std::size_t j = 0; j < n1; ++j) into.b1[j] += d_z1[j];
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = t.input[i];
    if (xi == 0.0) continue;
    double* g = into.w1.values.data() + i * n1;
    for (std::size_t j = 0; j < n1; ++j) g[j] += xi * d_z1[j];
  }
}

template <typename T>
BasicParamGrads<T> backward(const BasicAdapterParams<T>& p, const ForwardTrace<T>& t,
                            std::span<const double> grad_logits,
                            std::span<const double> grad_h2) {
  BasicParamGrads<double> acc(p.input_dim(), p.hidden1(), p.hidden2(), p.num_outputs());
  backward_accumulate(p, t, grad_logits, grad_h2, acc);
  if constexpr (std::is_same_v<T, double>) {
    return acc;
  } else {
    return acc.template cast<T>();
  }
}

template <typename T>
OptimizerState<T> OptimizerState<T>::zeros_like(const BasicAdapterParams<T>& params,
                                                double learning_rate, double momentum) {
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw ContractViolation("learning rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ContractViolation("momentum must lie in [0, 1)");
  }
  OptimizerState s;
  s.velocity = BasicAdapterParams<T>(params.input_dim(), params.hidden1(), params.hidden2(),
                                     params.num_outputs());
  s.learning_rate = learning_rate;
  s.momentum = momentum;
  return s;
}

template <typename T>
void sgd_step_inplace(BasicAdapterParams<T>& params, const BasicParamGrads<T>& grads,
                      OptimizerState<T>& state) {
  check_same_shape(params, grads, "sgd_step");
  check_same_shape(params, state.velocity, "sgd_step");
  const T mu = static_cast<T>(state.momentum);
  const T lr = static_cast<T>(state.learning_rate);
  auto update = [&](std::vector<T>& p, const std::vector<T>& g, std::vector<T>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = mu * v[i] + g[i];
      p[i] -= lr * v[i];
    }
  };
  update(params.w1.values, grads.w1.values, state.velocity.w1.values);
  update(params.b1, grads.b1, state.velocity.b1);
  update(params.w2.values, grads.w2.values, state.velocity.w2.values);
  update(params.b2, grads.b2, state.velocity.b2);
  update(params.w3.values, grads.w3.values, state.velocity.w3.values);
  update(params.b3, grads.b3, state.velocity.b3);
}

template <typename T>
std::pair<BasicAdapterParams<T>, OptimizerState<T>> sgd_step(BasicAdapterParams<T> params,
                                                             const BasicParamGrads<T>& grads,
                                                             OptimizerState<T> state) {
  sgd_step_inplace(params, grads, state);
  return {std::move(params), std::move(state)};
}

#define OSWATCH_INSTANTIATE(T)                                                               \
  template void check_shapes<T>(const BasicAdapterParams<T>&);                               \
  template BasicAdapterParams<T> init_params<T>(std::uint64_t, std::size_t, std::size_t,     \
                                                std::size_t, std::size_t);                   \
  template ForwardTrace<T> forward<T>(const BasicAdapterParams<T>&, std::span<const T>);     \
  template void backward_accumulate<T>(const BasicAdapterParams<T>&, const ForwardTrace<T>&, \
                                       std::span<const double>, std::span<const double>,     \
                                       BasicParamGrads<double>&);                            \
  template BasicParamGrads<T> backward<T>(const BasicAdapterParams<T>&,                      \
                                          const ForwardTrace<T>&, std::span<const double>,   \
                                          std::span<const double>);                          \
  template struct OptimizerState<T>;                                                         \
  template void sgd_step_inplace<T>(BasicAdapterParams<T>&, const BasicParamGrads<T>&,       \
                                    OptimizerState<T>&);                                     \
  template std::pair<BasicAdapterParams<T>, OptimizerState<T>> sgd_step<T>(                  \
      BasicAdapterParams<T>, const BasicParamGrads<T>&, OptimizerState<T>);

OSWATCH_INSTANTIATE(float)
OSWATCH_INSTANTIATE(double)
#undef OSWATCH_INSTANTIATE

std::vector<std::uint8_t> encode_osam(const Model& model) {
  const AdapterParams& p = model.params;
  check_shapes(p);
  model.loss.check();
  detail::ByteWriter w;
  w.bytes(kOsamMagic, 4);
  w.uint<std::uint32_t>(kOsamVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.input_dim()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.hidden1()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.hidden2()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.num_outputs()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.loss.variant));
  w.f64(model.loss.margin);
  w.f64(model.loss.xi);
  w.f64(model.loss.lambda);
  p.for_each_block([&](std::span<const float> block) {
    for (float v : block) w.f32(v);
  });
  return std::move(w.buffer());
}

Model decode_osam(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "OSAM");
  if (r.bytes(4) != std::string(kOsamMagic, 4)) {
    throw FormatError("OSAM: bad magic at byte offset 0");
  }
  const auto version = r.uint<std::uint32_t>();
  if (version != kOsamVersion) {
    throw FormatError("OSAM: unsupported version " + std::to_string(version) +
                      " at byte offset 4");
  }
  const std::size_t d = r.uint<std::uint32_t>();
  const std::size_t h1 = r.uint<std::uint32_t>();
  const std::size_t h2 = r.uint<std::uint32_t>();
  const std::size_t c = r.uint<std::uint32_t>();
  const std::size_t tag_offset = r.offset();
  const auto tag = r.uint<std::uint32_t>();
  if (tag > static_cast<std::uint32_t>(LossVariant::kMaxEntropy)) {
    throw FormatError("OSAM: unknown loss tag " + std::to_string(tag) + " at byte offset " +
                      std::to_string(tag_offset));
  }
  Model model;
  model.loss.variant = static_cast<LossVariant>(tag);
  model.loss.margin = r.f64();
  model.loss.xi = r.f64();
  model.loss.lambda = r.f64();
  if (d == 0 || h1 == 0 || h2 == 0 || c < 2) {
    throw FormatError("OSAM: invalid dimensions in header");
  }
  const std::size_t expected = 4 * closed_form_parameter_count(d, h1, h2, c);
  if (r.remaining() != expected) {
    throw FormatError("OSAM: expected " + std::to_string(expected) +
                      " bytes of weights after byte offset " + std::to_string(r.offset()) +
                      ", found " + std::to_string(r.remaining()));
  }
  AdapterParams p(d, h1, h2, c);
  p.for_each_block([&](std::span<float> block) {
    for (float& v : block) v = r.f32();
  });
  model.params = std::move(p);
  try {
    model.loss.check();
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("OSAM: ") + e.what());
  }
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_osam(model));
}

Model load_model(const std::filesystem::path& path) {
  return decode_osam(detail::read_file_bytes(path));
}

}  // namespace oswatch
