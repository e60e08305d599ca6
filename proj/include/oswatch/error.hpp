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

#include <stdexcept>
#include <string>

namespace oswatch {

// Base of every error raised by the toolkit. exit_code() is the process
// status the command-line tool reports for this error class.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept = 0;
};

// Bad flags, bad configuration keys, unmet command preconditions.
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Input data that cannot be used: malformed files, non-finite values,
// inconsistent dimensions, degenerate features.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateFeatureError : public DataError {
 public:
  using DataError::DataError;
};

// Caller broke an operation's precondition (shape mismatch, wrong label
// kind for a loss, ...).
class ContractViolation : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

// A metric was requested over a population that does not exist.
class UndefinedMetricError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

}  // namespace oswatch
