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
#include <functional>
#include <string>
#include <vector>

#include "oswatch/data.hpp"
#include "oswatch/losses.hpp"
#include "oswatch/net.hpp"

namespace oswatch {

struct TrainConfig {
  std::size_t epochs = 500;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  LossSpec loss;
  std::size_t h1 = kDefaultHidden1;
  std::size_t h2 = kDefaultHidden2;
  std::size_t val_every = 1;

  // Throws UsageError on zero epochs/batch/sizes/val_every and
  // ContractViolation on invalid optimizer or loss hyperparameters.
  void check() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;

  // "epoch,train_loss,val_loss,val_acc"
  std::string to_csv() const;
};

struct TrainResult {
  AdapterParams params;
  TrainHistory history;
};

// Indices of the records a variant trains on: Known records for SoftMax,
// Known and Negative records otherwise. Throws DataError if the set holds
// Unknown or Background records.
std::vector<std::size_t> training_indices(const Dataset& dataset, const LossSpec& loss);

// Variant-filtered records of one epoch, shuffled by (seed, epoch) and cut
// into batches of batch_size (the last one may be shorter). Throws
// UsageError when filtering leaves nothing.
std::vector<std::vector<std::size_t>> prepare_batches(const Dataset& dataset,
                                                      const TrainConfig& config,
                                                      std::size_t epoch);

struct ValidationResult {
  double loss = 0.0;
  double known_accuracy = 0.0;
};

// Mean loss over the variant-filtered records and the argmax accuracy over
// the known logits of Known records. Throws UndefinedMetricError when the
// set has no usable records.
ValidationResult validate(const AdapterParams& params, const Dataset& val_set,
                          const LossSpec& loss);

// Mean softmax entropy of the Negative records (nats).
double mean_negative_entropy(const AdapterParams& params, const Dataset& dataset);

using EpochObserver = std::function<void(const EpochStats&, const AdapterParams&)>;

// Mini-batch SGD with momentum on the mean per-sample loss. The output
// layer has loss.num_outputs(train_set.num_known) units. Throws
// DivergenceError on a non-finite loss.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                  const EpochObserver& observer = {});

}  // namespace oswatch
