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
#include <string_view>
#include <vector>

namespace oswatch {

// Identity of one embedding. Known ids index the gallery; the remaining
// kinds mark non-enrolled material: Negative samples are seen during
// training, Unknown and Background only ever appear as probes.
struct ClassLabel {
  enum class Kind : std::uint8_t { kKnown, kNegative, kUnknown, kBackground };

  Kind kind = Kind::kKnown;
  std::uint32_t id = 0;  // meaningful only for kKnown

  static constexpr ClassLabel known(std::uint32_t id) { return {Kind::kKnown, id}; }
  static constexpr ClassLabel negative() { return {Kind::kNegative, 0}; }
  static constexpr ClassLabel unknown() { return {Kind::kUnknown, 0}; }
  static constexpr ClassLabel background() { return {Kind::kBackground, 0}; }

  bool is_known() const { return kind == Kind::kKnown; }
  bool is_negative() const { return kind == Kind::kNegative; }
  // Unknown and Background both count as impostors at evaluation time.
  bool is_impostor() const { return kind == Kind::kUnknown || kind == Kind::kBackground; }

  // File encoding: >= 0 known id, -1 negative, -2 unknown, -3 background.
  std::int32_t encode() const;
  // Throws FormatError for codes below -3.
  static ClassLabel decode(std::int32_t code);

  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

std::string_view label_group_name(ClassLabel::Kind kind);

struct EmbeddingRecord {
  ClassLabel label;
  std::vector<float> vector;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct Dataset {
  std::size_t dim = 0;
  std::vector<EmbeddingRecord> records;
  std::size_t num_known = 0;

  // Builds a dataset, deriving num_known and checking every invariant.
  // Throws ContractViolation (shape/id problems) or DataError (non-finite).
  static Dataset from_records(std::size_t dim, std::vector<EmbeddingRecord> records);

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Checks dimension agreement, finiteness and dense known ids.
void validate(const Dataset& dataset);

enum class FileFormat { kBinary, kCsv };

// Picks kCsv for a ".csv" extension and kBinary otherwise.
FileFormat format_for_path(const std::filesystem::path& path);

Dataset read_embeddings(const std::filesystem::path& path, FileFormat format);
void write_embeddings(const Dataset& dataset, const std::filesystem::path& path,
                      FileFormat format);

// In-memory codecs behind the file functions.
std::vector<std::uint8_t> encode_osef(const Dataset& dataset);
Dataset decode_osef(const std::vector<std::uint8_t>& bytes);
std::string encode_csv(const Dataset& dataset);
Dataset decode_csv(std::string_view text);

struct SynthConfig {
  std::uint64_t seed = 42;
  std::size_t num_known = 10;
  std::size_t per_class = 100;
  std::size_t dim = 8;
  std::size_t negative_classes = 10;
  std::size_t unknown_classes = 10;
  double spread = 1.0;
};

struct SynthSplits {
  Dataset train;
  Dataset val;
  Dataset probe;
};

// Shell radii of the three populations, in units of spread.
inline constexpr double kKnownShellRadius = 4.0;
inline constexpr double kUnknownShellRadius = 6.0;
inline constexpr double kNegativeShellRadius = 8.0;

// Deterministic three-shell open-set benchmark. Each known and negative
// class contributes per_class samples split 80/20 into train/val by
// round-robin; each known class additionally contributes per_class probe
// samples and each unknown class per_class probe samples.
// Throws UsageError when num_known < 2, per_class < 4 or dim < 2.
SynthSplits synth_openset(const SynthConfig& config);

// Class means used by synth_openset for the given config, in generation
// order: known, negative, unknown.
struct SynthCentroids {
  std::vector<std::vector<double>> known;
  std::vector<std::vector<double>> negative;
  std::vector<std::vector<double>> unknown;
};
SynthCentroids synth_centroids(const SynthConfig& config);

}  // namespace oswatch
