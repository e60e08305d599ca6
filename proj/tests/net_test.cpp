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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "oswatch/error.hpp"

namespace oswatch {
namespace {

std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

BasicAdapterParams<double> random_params(std::uint64_t seed, std::size_t d, std::size_t h1,
                                         std::size_t h2, std::size_t c) {
  auto p = init_params<double>(seed, d, h1, h2, c);
  std::mt19937_64 gen(seed + 1000);
  std::normal_distribution<double> dist(0.0, 0.1);
  for (double& b : p.b1) b = dist(gen);
  for (double& b : p.b2) b = dist(gen);
  for (double& b : p.b3) b = dist(gen);
  return p;
}

TEST(Init, DeterministicZeroBiasesAndBounded) {
  const auto a = init_params<float>(3, 8, 16, 8, 5);
  const auto b = init_params<float>(3, 8, 16, 8, 5);
  const auto c = init_params<float>(4, 8, 16, 8, 5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.w1, c.w1);
  for (float v : a.b1) EXPECT_EQ(v, 0.0f);
  for (float v : a.b2) EXPECT_EQ(v, 0.0f);
  for (float v : a.b3) EXPECT_EQ(v, 0.0f);
  auto within = [](const Matrix<float>& m) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
    double max_abs = 0.0;
    for (float v : m.values) {
      EXPECT_LE(std::abs(v), bound);
      max_abs = std::max(max_abs, static_cast<double>(std::abs(v)));
    }
    // Draws should use a good share of the interval.
    EXPECT_GT(max_abs, 0.5 * bound);
  };
  within(a.w1);
  within(a.w2);
  within(a.w3);
}

TEST(Init, RejectsBadShapes) {
  EXPECT_THROW(init_params<float>(0, 0, 4, 4, 3), ContractViolation);
  EXPECT_THROW(init_params<float>(0, 4, 4, 4, 1), ContractViolation);
}

TEST(Forward, ZeroParamsGiveZeros) {
  const BasicAdapterParams<float> p(4, 6, 3, 2);
  const std::vector<float> x = {1, -2, 3, 0.5f};
  const auto t = forward<float>(p, x);
  for (float v : t.h1) EXPECT_EQ(v, 0.0f);
  for (float v : t.h2) EXPECT_EQ(v, 0.0f);
  for (float v : t.logits) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, SingleUnitHandValues) {
  BasicAdapterParams<double> p(1, 1, 1, 2);
  p.w1(0, 0) = 0.5;
  p.b1[0] = 0.1;
  p.w2(0, 0) = 2.0;
  p.b2[0] = -1.0;
  p.w3(0, 0) = 1.0;
  p.w3(0, 1) = -3.0;
  p.b3[1] = 0.25;
  const std::vector<double> x = {2.0};
  const auto t = forward<double>(p, x);
  const double h1 = std::tanh(1.1);
  EXPECT_DOUBLE_EQ(t.h1[0], h1);
  EXPECT_DOUBLE_EQ(t.h2[0], 2.0 * h1 - 1.0);
  EXPECT_DOUBLE_EQ(t.logits[0], 2.0 * h1 - 1.0);
  EXPECT_NEAR(t.logits[1], -3.0 * (2.0 * h1 - 1.0) + 0.25, 1e-15);
}

TEST(Forward, SmallInputsAreNearlyLinear) {
  // tanh(z) = z + O(z^3): with tiny inputs the adapter is the product of
  // the three weight matrices to third order.
  const auto p = random_params(8, 5, 7, 4, 3);
  BasicAdapterParams<double> linear = p;
  for (double& b : linear.b1) b = 0.0;
  std::mt19937_64 gen(1);
  const auto x = random_vector(gen, 5, 1e-3);
  const auto t = forward<double>(linear, x);
  for (std::size_t j = 0; j < 7; ++j) {
    double z = 0.0;
    for (std::size_t i = 0; i < 5; ++i) z += linear.w1(i, j) * x[i];
    EXPECT_NEAR(t.h1[j], z, std::abs(z * z * z) + 1e-18);
  }
}

TEST(Forward, MatchesNaiveOracle) {
  std::mt19937_64 gen(21);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_params(seed, 6, 12, 5, 4);
    const auto x = random_vector(gen, 6);
    const auto t = forward<double>(p, x);
    const auto a = oracle::naive_forward(p, x);
    for (std::size_t j = 0; j < a.h2.size(); ++j) EXPECT_NEAR(t.h2[j], a.h2[j], 1e-12);
    for (std::size_t j = 0; j < a.logits.size(); ++j) {
      EXPECT_NEAR(t.logits[j], a.logits[j], 1e-12);
    }
    // Single precision stays within 1e-6 relative on the same inputs.
    const auto pf = p.cast<float>();
    std::vector<float> xf(x.begin(), x.end());
    const auto tf = forward<float>(pf, xf);
    for (std::size_t j = 0; j < a.logits.size(); ++j) {
      EXPECT_NEAR(tf.logits[j], a.logits[j], 1e-5 * (1.0 + std::abs(a.logits[j])));
    }
  }
}

TEST(Forward, RejectsWrongInputLength) {
  const auto p = init_params<float>(0, 4, 4, 4, 3);
  const std::vector<float> x(5, 0.0f);
  EXPECT_THROW(forward<float>(p, x), ContractViolation);
}

TEST(Backward, ZeroCotangentGivesZeroGradients) {
  const auto p = random_params(1, 4, 6, 3, 3);
  std::mt19937_64 gen(2);
  const auto x = random_vector(gen, 4);
  const auto t = forward<double>(p, x);
  const std::vector<double> zero(3, 0.0);
  const auto g = backward<double>(p, t, zero, {});
  for (double v : oracle::flatten(g)) EXPECT_EQ(v, 0.0);
}

TEST(Backward, MatchesFiniteDifferencesForEveryLoss) {
  std::mt19937_64 gen(99);
  for (auto variant : {LossVariant::kSoftMax, LossVariant::kGarbage, LossVariant::kEntropic,
                       LossVariant::kObjectosphere, LossVariant::kMaxEntropy}) {
    LossSpec spec;
    spec.variant = variant;
    spec.xi = 3.0;
    spec.lambda = 0.1;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto p = random_params(seed * 7 + 1, 5, 9, 4, 4);
      const auto x = random_vector(gen, 5);
      const ClassLabel label = variant != LossVariant::kSoftMax && seed % 2
                                   ? ClassLabel::negative()
                                   : ClassLabel::known(static_cast<std::uint32_t>(seed % 3));
      const auto t = forward<double>(p, x);
      const LossOutput out = evaluate_loss(spec, t.logits_f64(), t.h2_f64(), label);
      const auto analytic = oracle::flatten(backward<double>(p, t, out.grad_logits, out.grad_h2));
      const auto numeric = oracle::finite_difference_grads(
          p, 1e-5, [&](const BasicAdapterParams<double>& q) {
            return oracle::end_to_end_loss(q, x, spec, label);
          });
      ASSERT_EQ(analytic.size(), numeric.size());
      for (std::size_t i = 0; i < analytic.size(); ++i) {
        EXPECT_TRUE(oracle::grads_agree(analytic[i], numeric[i]))
            << loss_name(variant) << " seed " << seed << " entry " << i << ": " << analytic[i]
            << " vs " << numeric[i];
      }
    }
  }
}

TEST(Backward, LinearInCotangent) {
  const auto p = random_params(4, 3, 5, 4, 3);
  std::mt19937_64 gen(4);
  const auto x = random_vector(gen, 3);
  const auto t = forward<double>(p, x);
  const auto gl = random_vector(gen, 3);
  const auto gh = random_vector(gen, 4);
  std::vector<double> gl2 = gl, gh2 = gh;
  for (double& v : gl2) v *= 2.0;
  for (double& v : gh2) v *= 2.0;
  const auto once = oracle::flatten(backward<double>(p, t, gl, gh));
  const auto twice = oracle::flatten(backward<double>(p, t, gl2, gh2));
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(twice[i], 2.0 * once[i]);
}

TEST(Backward, AccumulateSums) {
  const auto p = random_params(5, 3, 4, 3, 2);
  std::mt19937_64 gen(5);
  const auto x1 = random_vector(gen, 3), x2 = random_vector(gen, 3);
  const auto t1 = forward<double>(p, x1), t2 = forward<double>(p, x2);
  const std::vector<double> g = {1.0, -0.5};
  BasicParamGrads<double> acc(3, 4, 3, 2);
  backward_accumulate<double>(p, t1, g, {}, acc);
  backward_accumulate<double>(p, t2, g, {}, acc);
  const auto a = oracle::flatten(backward<double>(p, t1, g, {}));
  const auto b = oracle::flatten(backward<double>(p, t2, g, {}));
  const auto sum = oracle::flatten(acc);
  for (std::size_t i = 0; i < sum.size(); ++i) EXPECT_NEAR(sum[i], a[i] + b[i], 1e-15);
}

TEST(Sgd, PlainStepAndMomentumUnroll) {
  BasicAdapterParams<double> p(1, 1, 1, 2);
  p.w1(0, 0) = 1.0;
  BasicParamGrads<double> g(1, 1, 1, 2);
  g.w1(0, 0) = 0.5;
  auto state = OptimizerState<double>::zeros_like(p, 0.1, 0.0);
  auto [p1, s1] = sgd_step(p, g, state);
  EXPECT_DOUBLE_EQ(p1.w1(0, 0), 1.0 - 0.05);
  EXPECT_EQ(p.w1(0, 0), 1.0);  // input untouched

  // Two steps with the same gradient: velocity g then 0.9g + g, so the
  // total displacement is lr * (1 + 1.9) * g = 0.1g + 0.19g.
  auto m = OptimizerState<double>::zeros_like(p, 0.1, 0.9);
  BasicAdapterParams<double> q = p;
  sgd_step_inplace(q, g, m);
  sgd_step_inplace(q, g, m);
  EXPECT_NEAR(q.w1(0, 0), 1.0 - (0.1 + 0.19) * 0.5, 1e-15);
  EXPECT_NEAR(m.velocity.w1(0, 0), 1.9 * 0.5, 1e-15);
}

TEST(Sgd, ZeroLearningRateIsIdentity) {
  const auto p = random_params(6, 3, 4, 3, 2);
  BasicParamGrads<double> g(3, 4, 3, 2);
  for (double& v : g.w2.values) v = 1.0;
  auto state = OptimizerState<double>::zeros_like(p, 0.0, 0.9);
  auto q = p;
  for (int i = 0; i < 3; ++i) sgd_step_inplace(q, g, state);
  EXPECT_EQ(q, p);
}

TEST(Sgd, RejectsBadHyperparametersAndShapes) {
  const BasicAdapterParams<float> p(2, 2, 2, 2);
  EXPECT_THROW(OptimizerState<float>::zeros_like(p, -0.1, 0.9), ContractViolation);
  EXPECT_THROW(OptimizerState<float>::zeros_like(p, 0.1, 1.0), ContractViolation);
  EXPECT_THROW(OptimizerState<float>::zeros_like(p, NAN, 0.5), ContractViolation);
  auto state = OptimizerState<float>::zeros_like(p, 0.1, 0.5);
  const BasicParamGrads<float> wrong(2, 3, 2, 2);
  auto q = p;
  EXPECT_THROW(sgd_step_inplace(q, wrong, state), ContractViolation);
}

TEST(Model, OsamRoundTrip) {
  Model m{init_params<float>(12, 6, 10, 4, 5), LossSpec{}};
  m.loss.variant = LossVariant::kMaxEntropy;
  m.loss.margin = 0.25;
  m.params.b3[2] = -1.5f;
  const auto bytes = encode_osam(m);
  EXPECT_EQ(bytes.size(), 4 + 4 * 6 + 8 * 3 + 4 * closed_form_parameter_count(6, 10, 4, 5));
  EXPECT_EQ(decode_osam(bytes), m);
  EXPECT_EQ(encode_osam(decode_osam(bytes)), bytes);

  const auto path = std::filesystem::temp_directory_path() / "oswatch_net_test.osam";
  save_model(m, path);
  EXPECT_EQ(load_model(path), m);
  std::filesystem::remove(path);
}

TEST(Model, OsamErrors) {
  const Model m{init_params<float>(1, 3, 4, 2, 2), LossSpec{}};
  auto bytes = encode_osam(m);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_osam(truncated), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_osam(bad_magic), FormatError);
  auto bad_tag = bytes;
  bad_tag[24] = 9;  // loss tag follows magic, version and four dimensions
  EXPECT_THROW(decode_osam(bad_tag), FormatError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(decode_osam(extra), FormatError);
  EXPECT_THROW(load_model("/nonexistent/dir/model.osam"), IoError);
}

TEST(ParameterCount, ClosedFormMatchesStorage) {
  for (std::size_t d : {1u, 8u, 512u}) {
    for (std::size_t c : {2u, 10u, 11u}) {
      const BasicAdapterParams<float> p(d, 7, 3, c);
      EXPECT_EQ(p.parameter_count(), closed_form_parameter_count(d, 7, 3, c));
    }
  }
  EXPECT_EQ(closed_form_parameter_count(2, 3, 4, 5), 2 * 3 + 3 + 3 * 4 + 4 + 4 * 5 + 5u);
}

}  // namespace
}  // namespace oswatch
