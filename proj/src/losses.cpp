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

#include "oswatch/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oswatch/error.hpp"

namespace oswatch {
namespace {

void require_nonempty(std::span<const double> logits) {
  if (logits.empty()) throw ContractViolation("loss evaluated on an empty logit vector");
}

std::size_t known_target(const ClassLabel& label, std::size_t num_known, const char* loss) {
  if (!label.is_known()) {
    throw ContractViolation(std::string(loss) + " received a " +
                            std::string(label_group_name(label.kind)) + " sample");
  }
  if (label.id >= num_known) {
    throw ContractViolation(std::string(loss) + ": label " + std::to_string(label.id) +
                            " out of range for " + std::to_string(num_known) + " known classes");
  }
  return label.id;
}

// -log of the soft-margin probability of `target`, and its gradient
// (softmax of the margin-shifted logits minus the one-hot target).
LossOutput margin_cross_entropy(std::span<const double> logits, std::size_t target,
                                double margin) {
  const double shifted = logits[target] - margin;
  double top = shifted;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (j != target) top = std::max(top, logits[j]);
  }
  LossOutput out;
  out.grad_logits.resize(logits.size());
  double denom = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    const double e = std::exp((j == target ? shifted : logits[j]) - top);
    out.grad_logits[j] = e;
    denom += e;
  }
  for (double& g : out.grad_logits) g /= denom;
  out.grad_logits[target] -= 1.0;
  out.value = std::log(denom) - (shifted - top);
  return out;
}

// Cross-entropy against the uniform target over every logit.
LossOutput uniform_cross_entropy(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  const double n = static_cast<double>(logits.size());
  LossOutput out;
  out.grad_logits.resize(logits.size());
  double denom = 0.0;
  double mean_centered = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    const double centered = logits[j] - top;
    const double e = std::exp(centered);
    out.grad_logits[j] = e;
    denom += e;
    mean_centered += centered;
  }
  mean_centered /= n;
  for (double& g : out.grad_logits) g = g / denom - 1.0 / n;
  out.value = std::log(denom) - mean_centered;
  return out;
}

}  // namespace

std::string_view loss_name(LossVariant variant) {
  switch (variant) {
    case LossVariant::kSoftMax:
      return "softmax";
    case LossVariant::kGarbage:
      return "garbage";
    case LossVariant::kEntropic:
      return "entropic";
    case LossVariant::kObjectosphere:
      return "objectosphere";
    case LossVariant::kMaxEntropy:
      return "maxentropy";
  }
  return "?";
}

std::optional<LossVariant> parse_loss_name(std::string_view name) {
  for (auto v : {LossVariant::kSoftMax, LossVariant::kGarbage, LossVariant::kEntropic,
                 LossVariant::kObjectosphere, LossVariant::kMaxEntropy}) {
    if (loss_name(v) == name) return v;
  }
  return std::nullopt;
}

void LossSpec::check() const {
  if (!std::isfinite(margin) || margin < 0.0) {
    throw ContractViolation("margin must be finite and >= 0");
  }
  if (!std::isfinite(xi) || xi <= 0.0) throw ContractViolation("xi must be finite and > 0");
  if (!std::isfinite(lambda) || lambda <= 0.0) {
    throw ContractViolation("lambda must be finite and > 0");
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  require_nonempty(logits);
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(logits[j] - top);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

double soft_margin_prob(std::span<const double> logits, std::size_t target, double margin) {
  require_nonempty(logits);
  if (target >= logits.size()) throw ContractViolation("soft_margin_prob: target out of range");
  if (margin < 0.0) throw ContractViolation("soft_margin_prob: negative margin");
  return std::exp(-margin_cross_entropy(logits, target, margin).value);
}

LossOutput entropic_loss(std::span<const double> logits, const ClassLabel& label) {
  require_nonempty(logits);
  if (label.is_negative()) return uniform_cross_entropy(logits);
  return margin_cross_entropy(logits, known_target(label, logits.size(), "entropic loss"), 0.0);
}

LossOutput max_entropy_loss(std::span<const double> logits, const ClassLabel& label,
                            double margin) {
  require_nonempty(logits);
  if (margin < 0.0) throw ContractViolation("max-entropy loss: negative margin");
  if (label.is_negative()) return uniform_cross_entropy(logits);
  return margin_cross_entropy(logits, known_target(label, logits.size(), "max-entropy loss"),
                              margin);
}

double magnitude_penalty(std::span<const double> h2, const ClassLabel& label, double xi) {
  double sq = 0.0;
  for (double v : h2) sq += v * v;
  if (label.is_negative()) return sq;
  const double gap = std::max(xi - std::sqrt(sq), 0.0);
  return gap * gap;
}

LossOutput objectosphere_loss(std::span<const double> logits, std::span<const double> h2,
                              const ClassLabel& label, double xi, double lambda) {
  if (!(xi > 0.0) || !(lambda > 0.0)) {
    throw ContractViolation("objectosphere loss needs xi > 0 and lambda > 0");
  }
  LossOutput out = entropic_loss(logits, label);
  out.grad_h2.assign(h2.size(), 0.0);
  double sq = 0.0;
  for (double v : h2) sq += v * v;
  if (label.is_negative()) {
    out.value += lambda * sq;
    for (std::size_t i = 0; i < h2.size(); ++i) out.grad_h2[i] = 2.0 * lambda * h2[i];
    return out;
  }
  const double norm = std::sqrt(sq);
  const double gap = xi - norm;
  if (gap > 0.0) {
    out.value += lambda * gap * gap;
    // At the origin the penalty has no preferred direction; leave it zero.
    if (norm > 0.0) {
      const double scale = -2.0 * lambda * gap / norm;
      for (std::size_t i = 0; i < h2.size(); ++i) out.grad_h2[i] = scale * h2[i];
    }
  }
  return out;
}

LossOutput garbage_loss(std::span<const double> logits, const ClassLabel& label) {
  if (logits.size() < 2) throw ContractViolation("garbage loss needs |G| + 1 >= 2 logits");
  const std::size_t garbage = logits.size() - 1;
  if (label.is_negative()) return margin_cross_entropy(logits, garbage, 0.0);
  return margin_cross_entropy(logits, known_target(label, garbage, "garbage loss"), 0.0);
}

LossOutput plain_ce_loss(std::span<const double> logits, const ClassLabel& label) {
  require_nonempty(logits);
  return margin_cross_entropy(logits, known_target(label, logits.size(), "softmax loss"), 0.0);
}

LossOutput evaluate_loss(const LossSpec& spec, std::span<const double> logits,
                         std::span<const double> h2, const ClassLabel& label) {
  switch (spec.variant) {
    case LossVariant::kSoftMax:
      return plain_ce_loss(logits, label);
    case LossVariant::kGarbage:
      return garbage_loss(logits, label);
    case LossVariant::kEntropic:
      return entropic_loss(logits, label);
    case LossVariant::kObjectosphere:
      return objectosphere_loss(logits, h2, label, spec.xi, spec.lambda);
    case LossVariant::kMaxEntropy:
      return max_entropy_loss(logits, label, spec.margin);
  }
  throw ContractViolation("unknown loss variant");
}

double softmax_entropy(std::span<const double> logits) {
  const auto p = softmax(logits);
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

}  // namespace oswatch
