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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "oswatch/data.hpp"

namespace oswatch {

enum class LossVariant : std::uint32_t {
  kSoftMax = 0,
  kGarbage = 1,
  kEntropic = 2,
  kObjectosphere = 3,
  kMaxEntropy = 4,
};

std::string_view loss_name(LossVariant variant);
std::optional<LossVariant> parse_loss_name(std::string_view name);

struct LossSpec {
  LossVariant variant = LossVariant::kEntropic;
  double margin = 0.40;  // soft-margin penalty m on the target logit
  double xi = 1.0;       // target feature magnitude for knowns
  double lambda = 0.01;  // weight of the feature-magnitude penalty

  // Output layer width: one logit per known id, plus the extra class for
  // the garbage variant.
  std::size_t num_outputs(std::size_t num_known) const {
    return variant == LossVariant::kGarbage ? num_known + 1 : num_known;
  }
  // Whether training keeps Negative records for this variant.
  bool uses_negatives() const { return variant != LossVariant::kSoftMax; }

  // Throws ContractViolation on non-finite or out-of-range hyperparameters.
  void check() const;

  friend bool operator==(const LossSpec&, const LossSpec&) = default;
};

struct LossOutput {
  double value = 0.0;
  std::vector<double> grad_logits;
  // Gradient with respect to the compact feature. Empty means zero; only
  // the objectosphere loss fills it.
  std::vector<double> grad_h2;
};

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

// exp(l_g - m) / (exp(l_g - m) + sum_{j != g} exp(l_j)).
double soft_margin_prob(std::span<const double> logits, std::size_t target, double margin);

// Cross-entropy on known samples; uniform target over all |G| logits on
// negatives.
LossOutput entropic_loss(std::span<const double> logits, const ClassLabel& label);

// Soft-margin cross-entropy on known samples; the entropic negative branch
// (without margin) on negatives.
LossOutput max_entropy_loss(std::span<const double> logits, const ClassLabel& label,
                            double margin);

// Entropic loss plus lambda * max(xi - |h2|, 0)^2 for knowns and
// lambda * |h2|^2 for negatives.
LossOutput objectosphere_loss(std::span<const double> logits, std::span<const double> h2,
                              const ClassLabel& label, double xi, double lambda);

// The magnitude penalty alone, before the lambda weight.
double magnitude_penalty(std::span<const double> h2, const ClassLabel& label, double xi);

// Cross-entropy over |G| + 1 outputs; negatives target the last one.
LossOutput garbage_loss(std::span<const double> logits, const ClassLabel& label);

// Cross-entropy on known samples only.
LossOutput plain_ce_loss(std::span<const double> logits, const ClassLabel& label);

// Dispatches on spec.variant.
LossOutput evaluate_loss(const LossSpec& spec, std::span<const double> logits,
                         std::span<const double> h2, const ClassLabel& label);

// Shannon entropy (nats) of softmax(logits).
double softmax_entropy(std::span<const double> logits);

}  // namespace oswatch
