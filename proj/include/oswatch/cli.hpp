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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oswatch/trainer.hpp"

namespace oswatch {

// Training experiment as read from a JSON document. Keys match the long
// flag names of the train command.
struct ExperimentConfig {
  TrainConfig train;
  std::optional<std::filesystem::path> train_path;
  std::optional<std::filesystem::path> val_path;
  std::optional<std::filesystem::path> out_dir;

  // Throws UsageError listing the valid keys on an unknown key, and on
  // values of the wrong type.
  static ExperimentConfig from_json(const std::string& text);
  static const std::vector<std::string>& keys();
};

// Runs the command line `oswatch <args...>` and returns the exit status:
// 0 success, 2 usage, 3 data, 4 numeric, 5 I/O.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oswatch
