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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "oswatch/losses.hpp"

namespace oswatch {

// Dense row-major matrix.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, T(0)) {}

  T& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<T> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

inline constexpr std::size_t kDefaultHidden1 = 512;
inline constexpr std::size_t kDefaultHidden2 = 256;

// Weights of the three-layer adapter. Layer k maps its input u to
// w_k^T u + b_k, so w1 is input_dim x hidden1, w2 is hidden1 x hidden2 and
// w3 is hidden2 x num_outputs.
template <typename T>
struct BasicAdapterParams {
  Matrix<T> w1, w2, w3;
  std::vector<T> b1, b2, b3;

  BasicAdapterParams() = default;
  BasicAdapterParams(std::size_t d, std::size_t h1, std::size_t h2, std::size_t c)
      : w1(d, h1), w2(h1, h2), w3(h2, c), b1(h1, T(0)), b2(h2, T(0)), b3(c, T(0)) {}

  std::size_t input_dim() const { return w1.rows; }
  std::size_t hidden1() const { return w1.cols; }
  std::size_t hidden2() const { return w2.cols; }
  std::size_t num_outputs() const { return w3.cols; }

  // Number of stored entries, counted block by block.
  std::size_t parameter_count() const {
    return w1.values.size() + b1.size() + w2.values.size() + b2.size() + w3.values.size() +
           b3.size();
  }

  // Visits the six blocks in file order: w1, b1, w2, b2, w3, b3.
  template <typename F>
  void for_each_block(F&& f) {
    f(std::span<T>(w1.values));
    f(std::span<T>(b1));
    f(std::span<T>(w2.values));
    f(std::span<T>(b2));
    f(std::span<T>(w3.values));
    f(std::span<T>(b3));
  }
  template <typename F>
  void for_each_block(F&& f) const {
    f(std::span<const T>(w1.values));
    f(std::span<const T>(b1));
    f(std::span<const T>(w2.values));
    f(std::span<const T>(b2));
    f(std::span<const T>(w3.values));
    f(std::span<const T>(b3));
  }

  template <typename U>
  BasicAdapterParams<U> cast() const {
    BasicAdapterParams<U> out(input_dim(), hidden1(), hidden2(), num_outputs());
    auto copy = [](const auto& from, auto& to) {
      for (std::size_t i = 0; i < from.size(); ++i) to[i] = static_cast<U>(from[i]);
    };
    copy(w1.values, out.w1.values);
    copy(w2.values, out.w2.values);
    copy(w3.values, out.w3.values);
    copy(b1, out.b1);
    copy(b2, out.b2);
    copy(b3, out.b3);
    return out;
  }

  friend bool operator==(const BasicAdapterParams&, const BasicAdapterParams&) = default;
};

// Gradients share the parameter layout.
template <typename T>
using BasicParamGrads = BasicAdapterParams<T>;

using AdapterParams = BasicAdapterParams<float>;
using ParamGrads = BasicParamGrads<float>;

// 2048*512 + 512 + 512*256 + 256 + 256*C + C for the default topology.
constexpr std::size_t closed_form_parameter_count(std::size_t d, std::size_t h1, std::size_t h2,
                                                  std::size_t c) {
  return d * h1 + h1 + h1 * h2 + h2 + h2 * c + c;
}

// Activations of one sample. h2 is the compact feature used for scoring.
template <typename T>
struct ForwardTrace {
  std::vector<T> input;
  std::vector<T> h1;  // tanh(w1^T x + b1)
  std::vector<T> h2;  // w2^T h1 + b2, no activation
  std::vector<T> logits;

  std::vector<double> logits_f64() const { return {logits.begin(), logits.end()}; }
  std::vector<double> h2_f64() const { return {h2.begin(), h2.end()}; }
};

// Glorot-uniform weights, zero biases, deterministic in seed.
template <typename T>
BasicAdapterParams<T> init_params(std::uint64_t seed, std::size_t d, std::size_t h1,
                                  std::size_t h2, std::size_t c);

template <typename T>
ForwardTrace<T> forward(const BasicAdapterParams<T>& params, std::span<const T> x);

// Adds the gradients of one sample into `into`. grad_logits is dL/dlogits;
// grad_h2 is any loss gradient taken directly on the compact feature
// (zero except for the feature-magnitude penalty).
template <typename T>
void backward_accumulate(const BasicAdapterParams<T>& params, const ForwardTrace<T>& trace,
                         std::span<const double> grad_logits, std::span<const double> grad_h2,
                         BasicParamGrads<double>& into);

template <typename T>
BasicParamGrads<T> backward(const BasicAdapterParams<T>& params, const ForwardTrace<T>& trace,
                            std::span<const double> grad_logits,
                            std::span<const double> grad_h2);

template <typename T>
struct OptimizerState {
  BasicAdapterParams<T> velocity;
  double learning_rate = 0.01;
  double momentum = 0.9;

  // Zero velocity shaped like params; throws ContractViolation for
  // learning_rate < 0 or momentum outside [0, 1).
  static OptimizerState zeros_like(const BasicAdapterParams<T>& params, double learning_rate,
                                   double momentum);
};

// v <- momentum * v + g;  p <- p - learning_rate * v.
template <typename T>
void sgd_step_inplace(BasicAdapterParams<T>& params, const BasicParamGrads<T>& grads,
                      OptimizerState<T>& state);

template <typename T>
std::pair<BasicAdapterParams<T>, OptimizerState<T>> sgd_step(BasicAdapterParams<T> params,
                                                             const BasicParamGrads<T>& grads,
                                                             OptimizerState<T> state);

// Throws ContractViolation when the six blocks disagree in shape, any
// dimension is zero, or there are fewer than two outputs.
template <typename T>
void check_shapes(const BasicAdapterParams<T>& params);

struct Model {
  AdapterParams params;
  LossSpec loss;

  friend bool operator==(const Model&, const Model&) = default;
};

// OSAM: "OSAM", u32 version, u32 d, h1, h2, C, u32 loss tag, f64 m, xi,
// lambda, then row-major f32 blocks w1, b1, w2, b2, w3, b3.
std::vector<std::uint8_t> encode_osam(const Model& model);
Model decode_osam(const std::vector<std::uint8_t>& bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace oswatch
