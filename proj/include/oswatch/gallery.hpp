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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oswatch/data.hpp"
#include "oswatch/net.hpp"

namespace oswatch {

// Norms below this are treated as carrying no direction.
inline constexpr double kMinFeatureNorm = 1e-12;

struct ProbeFeature {
  ClassLabel true_label;
  std::vector<float> feature;
};

// Compact feature of one record: the adapter's second hidden layer.
ProbeFeature extract_compact(const AdapterParams& params, const EmbeddingRecord& record);
std::vector<ProbeFeature> extract_compact(const AdapterParams& params, const Dataset& dataset);

// Input embeddings used as-is (no adapter).
std::vector<ProbeFeature> raw_features(const Dataset& dataset);

struct GalleryEntry {
  std::uint32_t id = 0;
  std::vector<float> templ;
  std::size_t sample_count = 0;
};

struct Gallery {
  std::vector<GalleryEntry> entries;  // entries[g].id == g
  std::optional<GalleryEntry> garbage;

  bool has_garbage() const { return garbage.has_value(); }
  std::size_t size() const { return entries.size(); }
  std::size_t dim() const { return entries.empty() ? 0 : entries.front().templ.size(); }
};

// Averages the unit-normalized features of each known id into its template
// (the average itself is not renormalized). With with_garbage set, Negative
// features form the extra template; otherwise Negative features are a
// contract violation. Throws DegenerateFeatureError naming the offending
// record for near-zero features.
Gallery enroll(std::span<const ProbeFeature> features, bool with_garbage);
Gallery enroll(const AdapterParams& params, const Dataset& gallery_records, bool with_garbage);

// a^T b / (|a| |b|), clamped to [-1, 1].
double cosine(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const double> a, std::span<const double> b);

struct ScoreRow {
  ClassLabel true_label;
  std::vector<double> scores;    // one per gallery id
  std::optional<double> garbage;  // present iff the gallery has a garbage template
  // Probe had no usable direction; below every threshold.
  bool degenerate = false;
};

struct ScoreMatrix {
  std::size_t num_known = 0;
  bool has_garbage = false;
  std::vector<ScoreRow> rows;
  std::size_t degenerate_rows = 0;
};

ScoreMatrix score_probes(const Gallery& gallery, std::span<const ProbeFeature> probes);

// Highest-scoring gallery id; ties go to the lowest id.
std::uint32_t best_known(const ScoreRow& row);

struct Decision {
  bool accepted = false;
  std::uint32_t id = 0;  // valid when accepted

  static Decision accept(std::uint32_t id) { return {true, id}; }
  static Decision reject() { return {false, 0}; }
  friend bool operator==(const Decision&, const Decision&) = default;
};

// Accepts the best known id when its score reaches theta and the garbage
// template (if any) does not score strictly higher.
Decision classify(const ScoreRow& row, double theta);

// Gallery files reuse OSEF: one record per template labeled by id, the
// garbage template labeled as Negative. Sample counts are not stored;
// loaded entries report sample_count = 1.
void save_gallery(const Gallery& gallery, const std::filesystem::path& path);
Gallery load_gallery(const std::filesystem::path& path);

// "true_label,s0,...,s{G-1}[,garbage]"; degenerate rows carry "nan".
std::string score_matrix_to_csv(const ScoreMatrix& scores);
ScoreMatrix score_matrix_from_csv(std::string_view text);

}  // namespace oswatch
