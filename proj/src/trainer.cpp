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

#include "oswatch/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "oswatch/error.hpp"
#include "oswatch/parallel.hpp"
#include "oswatch/random.hpp"

namespace oswatch {
namespace {

// Samples per gradient accumulator. Partial sums are combined in chunk
// order, so the result does not depend on the number of threads.
constexpr std::size_t kChunk = 16;

constexpr std::uint64_t kInitStream = 0x1a17;

std::size_t known_logit_argmax(std::span<const float> logits, std::size_t num_known) {
  std::size_t best = 0;
  for (std::size_t g = 1; g < num_known; ++g) {
    if (logits[g] > logits[best]) best = g;
  }
  return best;
}

std::string describe(const TrainConfig& c) {
  std::ostringstream s;
  s << "loss=" << loss_name(c.loss.variant) << " lr=" << c.learning_rate
    << " momentum=" << c.momentum << " batch=" << c.batch_size << " margin=" << c.loss.margin
    << " xi=" << c.loss.xi << " lambda=" << c.loss.lambda;
  return s.str();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::check() const {
  if (epochs == 0) throw UsageError("epochs must be >= 1");
  if (batch_size == 0) throw UsageError("batch size must be >= 1");
  if (h1 == 0 || h2 == 0) throw UsageError("hidden layer sizes must be positive");
  if (val_every == 0) throw UsageError("val_every must be >= 1");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw ContractViolation("learning rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractViolation("momentum must be in [0, 1)");
  loss.check();
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,val_acc\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," + fmt(e.val_loss) + "," +
           fmt(e.val_acc) + "\n";
  }
  return out;
}

std::vector<std::size_t> training_indices(const Dataset& dataset, const LossSpec& loss) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const ClassLabel& l = dataset.records[i].label;
    if (l.is_impostor()) {
      throw DataError("record " + std::to_string(i) + " is a " +
                      std::string(label_group_name(l.kind)) +
                      " sample; those belong to probe sets only");
    }
    if (l.is_known() || loss.uses_negatives()) idx.push_back(i);
  }
  return idx;
}

std::vector<std::vector<std::size_t>> prepare_batches(const Dataset& dataset,
                                                      const TrainConfig& config,
                                                      std::size_t epoch) {
  if (config.batch_size == 0) throw UsageError("batch size must be >= 1");
  std::vector<std::size_t> idx = training_indices(dataset, config.loss);
  if (idx.empty()) {
    throw UsageError(std::string("no training records left for the ") +
                     std::string(loss_name(config.loss.variant)) + " loss" +
                     (config.loss.uses_negatives() ? "" : " (it trains on known records only)"));
  }
  Rng rng(Rng::mix(config.seed, epoch));
  rng.shuffle(std::span<std::size_t>(idx));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < idx.size(); start += config.batch_size) {
    const std::size_t end = std::min(idx.size(), start + config.batch_size);
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

ValidationResult validate(const AdapterParams& params, const Dataset& val_set,
                          const LossSpec& loss) {
  if (val_set.dim != params.input_dim()) {
    throw ContractViolation("validation data dimension " + std::to_string(val_set.dim) +
                            " does not match model input dimension " +
                            std::to_string(params.input_dim()));
  }
  const std::vector<std::size_t> idx = training_indices(val_set, loss);
  if (idx.empty()) throw UndefinedMetricError("validation set is empty after filtering");
  const std::size_t num_known =
      loss.variant == LossVariant::kGarbage ? params.num_outputs() - 1 : params.num_outputs();
  double loss_sum = 0.0;
  std::size_t known = 0, correct = 0;
  for (std::size_t i : idx) {
    const EmbeddingRecord& r = val_set.records[i];
    const auto trace = forward<float>(params, r.vector);
    loss_sum += evaluate_loss(loss, trace.logits_f64(), trace.h2_f64(), r.label).value;
    if (r.label.is_known()) {
      ++known;
      if (known_logit_argmax(trace.logits, num_known) == r.label.id) ++correct;
    }
  }
  ValidationResult out;
  out.loss = loss_sum / static_cast<double>(idx.size());
  out.known_accuracy = known ? static_cast<double>(correct) / static_cast<double>(known) : 0.0;
  return out;
}

double mean_negative_entropy(const AdapterParams& params, const Dataset& dataset) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : dataset.records) {
    if (!r.label.is_negative()) continue;
    sum += softmax_entropy(forward<float>(params, r.vector).logits_f64());
    ++n;
  }
  if (n == 0) throw UndefinedMetricError("no negative records to measure entropy on");
  return sum / static_cast<double>(n);
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                  const EpochObserver& observer) {
  config.check();
  if (train_set.num_known == 0) throw UsageError("training set has no known records");
  if (val_set.dim != train_set.dim) {
    throw ContractViolation("validation dimension " + std::to_string(val_set.dim) +
                            " differs from training dimension " + std::to_string(train_set.dim));
  }
  const std::size_t outputs = config.loss.num_outputs(train_set.num_known);
  if (outputs < 2) throw UsageError("training needs at least two output classes");

  TrainResult result;
  AdapterParams& params = result.params;
  params = init_params<float>(Rng::mix(config.seed, kInitStream), train_set.dim, config.h1,
                              config.h2, outputs);
  auto opt = OptimizerState<float>::zeros_like(params, config.learning_rate, config.momentum);

  const std::size_t max_chunks = (config.batch_size + kChunk - 1) / kChunk;
  std::vector<BasicParamGrads<double>> partial(
      max_chunks, BasicParamGrads<double>(train_set.dim, config.h1, config.h2, outputs));
  std::vector<double> partial_loss(max_chunks);
  std::vector<char> partial_bad(max_chunks);
  ParamGrads grads(train_set.dim, config.h1, config.h2, outputs);
  std::vector<std::span<float>> grad_blocks;
  grads.for_each_block([&](std::span<float> block) { grad_blocks.push_back(block); });
  std::vector<std::vector<std::span<double>>> partial_blocks(max_chunks);
  for (std::size_t c = 0; c < max_chunks; ++c) {
    partial[c].for_each_block([&](std::span<double> block) { partial_blocks[c].push_back(block); });
  }

  ValidationResult last_val;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = prepare_batches(train_set, config, epoch);
    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
      parallel_for(chunks, [&](std::size_t c) {
        BasicParamGrads<double>& acc = partial[c];
        acc.for_each_block([](std::span<double> block) {
          std::fill(block.begin(), block.end(), 0.0);
        });
        double loss_sum = 0.0;
        bool bad = false;
        const std::size_t end = std::min(batch.size(), (c + 1) * kChunk);
        for (std::size_t s = c * kChunk; s < end; ++s) {
          const EmbeddingRecord& r = train_set.records[batch[s]];
          const auto trace = forward<float>(params, r.vector);
          const LossOutput out =
              evaluate_loss(config.loss, trace.logits_f64(), trace.h2_f64(), r.label);
          if (!std::isfinite(out.value)) bad = true;
          loss_sum += out.value;
          backward_accumulate<float>(params, trace, out.grad_logits, out.grad_h2, acc);
        }
        partial_loss[c] = loss_sum;
        partial_bad[c] = bad;
      });

      double batch_loss = 0.0;
      for (std::size_t c = 0; c < chunks; ++c) {
        if (partial_bad[c]) {
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(b + 1) + " (" + describe(config) +
                                ")");
        }
        batch_loss += partial_loss[c];
      }
      epoch_loss += batch_loss;
      epoch_count += batch.size();

      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t k = 0; k < grad_blocks.size(); ++k) {
        std::span<float> out = grad_blocks[k];
        for (std::size_t i = 0; i < out.size(); ++i) {
          double sum = 0.0;
          for (std::size_t c = 0; c < chunks; ++c) sum += partial_blocks[c][k][i];
          out[i] = static_cast<float>(sum * inv);
        }
      }
      sgd_step_inplace(params, grads, opt);
    }

    if (epoch == 1 || epoch % config.val_every == 0 || epoch == config.epochs) {
      last_val = validate(params, val_set, config.loss);
    }
    EpochStats stats{epoch, epoch_loss / static_cast<double>(epoch_count), last_val.loss,
                     last_val.known_accuracy};
    result.history.epochs.push_back(stats);
    if (observer) observer(stats, params);
  }
  return result;
}

}  // namespace oswatch
