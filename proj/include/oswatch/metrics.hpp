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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oswatch/gallery.hpp"

namespace oswatch {

// Share of Known rows identified correctly with a score of at least theta.
// Throws UndefinedMetricError without Known rows.
double tpir(const ScoreMatrix& scores, double theta);

// Share of Unknown and Background rows accepted as some gallery id at
// theta. Throws UndefinedMetricError without such rows.
double fpir(const ScoreMatrix& scores, double theta);

struct CurvePoint {
  double theta = 0.0;
  double fpir = 0.0;
  double tpir = 0.0;
};

struct OpenSetCurve {
  std::vector<CurvePoint> points;  // descending theta
  std::size_t num_known_rows = 0;
  std::size_t num_impostor_rows = 0;
};

// Sweeps theta over every distinct row maximum, plus one value above the
// largest, so the curve is the exact step function.
OpenSetCurve oroc_curve(const ScoreMatrix& scores);

struct OperatingPoint {
  double fpir_target = 0.0;
  std::optional<double> tpir;   // nullopt: not resolvable
  std::optional<double> theta;
};

inline constexpr double kTableFpirTargets[] = {1.0, 1e-1, 1e-2, 1e-3};

// For each target, the TPIR at the most permissive swept threshold whose
// FPIR does not exceed the target. Targets below 1 / |impostors| are not
// resolvable.
std::vector<OperatingPoint> tpir_at_fpir(const OpenSetCurve& curve,
                                         std::span<const double> targets);

struct EvalDiagnostics {
  std::size_t degenerate_rows = 0;
  // Known rows whose best score is shared by several ids.
  std::size_t known_ties = 0;
  std::size_t known_ties_resolved_correctly = 0;
};

EvalDiagnostics diagnose(const ScoreMatrix& scores);

struct GroupHistogram {
  ClassLabel::Kind group = ClassLabel::Kind::kKnown;
  std::vector<std::size_t> counts;
  std::size_t size = 0;
  double median = 0.0;
};

struct MagnitudeHistogram {
  std::vector<double> edges;           // bins + 1 shared edges
  std::vector<GroupHistogram> groups;  // present groups, label-kind order

  const GroupHistogram* find(ClassLabel::Kind group) const;
};

// L2 norms of the features, binned on one equal-width grid spanning the
// pooled range. Throws UndefinedMetricError on an empty list and
// ContractViolation for bins < 2.
MagnitudeHistogram magnitude_histogram(std::span<const ProbeFeature> features, std::size_t bins);

std::string curve_to_csv(const OpenSetCurve& curve);
std::string table_to_csv(std::span<const OperatingPoint> table);
std::string histogram_to_csv(const MagnitudeHistogram& hist);

}  // namespace oswatch
