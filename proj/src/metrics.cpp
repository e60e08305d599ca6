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

#include "oswatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "oswatch/error.hpp"

namespace oswatch {
namespace {

std::size_t count_rows(const ScoreMatrix& scores, bool known) {
  return static_cast<std::size_t>(std::count_if(
      scores.rows.begin(), scores.rows.end(), [&](const ScoreRow& r) {
        return known ? r.true_label.is_known() : r.true_label.is_impostor();
      }));
}

void check_probe_labels(const ScoreMatrix& scores) {
  for (std::size_t i = 0; i < scores.rows.size(); ++i) {
    if (scores.rows[i].true_label.is_negative()) {
      throw DataError("score row " + std::to_string(i) +
                      " is a negative sample; negatives are training-only");
    }
  }
}

// A row's contribution to the curve: from `threshold` downward it counts as
// a hit (correct identification for known rows, false alarm for
// impostors) iff `hit`.
struct RowEvent {
  double threshold;
  bool known;
  bool hit;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double tpir(const ScoreMatrix& scores, double theta) {
  check_probe_labels(scores);
  const std::size_t total = count_rows(scores, true);
  if (total == 0) throw UndefinedMetricError("TPIR needs at least one known probe");
  std::size_t hits = 0;
  for (const auto& row : scores.rows) {
    if (!row.true_label.is_known()) continue;
    const Decision d = classify(row, theta);
    if (d.accepted && d.id == row.true_label.id) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

double fpir(const ScoreMatrix& scores, double theta) {
  check_probe_labels(scores);
  const std::size_t total = count_rows(scores, false);
  if (total == 0) throw UndefinedMetricError("FPIR needs at least one unknown probe");
  std::size_t alarms = 0;
  for (const auto& row : scores.rows) {
    if (row.true_label.is_impostor() && classify(row, theta).accepted) ++alarms;
  }
  return static_cast<double>(alarms) / static_cast<double>(total);
}

OpenSetCurve oroc_curve(const ScoreMatrix& scores) {
  check_probe_labels(scores);
  OpenSetCurve curve;
  curve.num_known_rows = count_rows(scores, true);
  curve.num_impostor_rows = count_rows(scores, false);
  if (curve.num_known_rows == 0) throw UndefinedMetricError("O-ROC needs known probes");
  if (curve.num_impostor_rows == 0) throw UndefinedMetricError("O-ROC needs unknown probes");

  std::vector<RowEvent> events;
  events.reserve(scores.rows.size());
  for (const auto& row : scores.rows) {
    if (row.degenerate) continue;
    const Decision loosest = classify(row, -INFINITY);
    const bool known = row.true_label.is_known();
    const bool hit = known ? (loosest.accepted && loosest.id == row.true_label.id)
                           : loosest.accepted;
    events.push_back({row.scores[best_known(row)], known, hit});
  }
  std::sort(events.begin(), events.end(),
            [](const RowEvent& a, const RowEvent& b) { return a.threshold > b.threshold; });

  const double top = events.empty() ? 1.0 : events.front().threshold;
  curve.points.push_back({std::nextafter(top, INFINITY), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < events.size();) {
    const double theta = events[i].threshold;
    for (; i < events.size() && events[i].threshold == theta; ++i) {
      if (!events[i].hit) continue;
      (events[i].known ? tp : fp) += 1;
    }
    curve.points.push_back({theta,
                            static_cast<double>(fp) / static_cast<double>(curve.num_impostor_rows),
                            static_cast<double>(tp) / static_cast<double>(curve.num_known_rows)});
  }
  return curve;
}

std::vector<OperatingPoint> tpir_at_fpir(const OpenSetCurve& curve,
                                         std::span<const double> targets) {
  if (curve.points.empty()) throw ContractViolation("tpir_at_fpir: empty curve");
  const double resolution =
      curve.num_impostor_rows == 0 ? INFINITY : 1.0 / static_cast<double>(curve.num_impostor_rows);
  std::vector<OperatingPoint> table;
  for (double target : targets) {
    OperatingPoint op{target, std::nullopt, std::nullopt};
    if (resolution <= target) {
      // FPIR grows as theta falls, so the last admissible point is the most
      // permissive one.
      for (const auto& p : curve.points) {
        if (p.fpir > target) break;
        op.tpir = p.tpir;
        op.theta = p.theta;
      }
    }
    table.push_back(op);
  }
  return table;
}

EvalDiagnostics diagnose(const ScoreMatrix& scores) {
  EvalDiagnostics d;
  d.degenerate_rows = scores.degenerate_rows;
  for (const auto& row : scores.rows) {
    if (row.degenerate || !row.true_label.is_known()) continue;
    const std::uint32_t best = best_known(row);
    const auto ties = std::count(row.scores.begin(), row.scores.end(), row.scores[best]);
    if (ties > 1) {
      ++d.known_ties;
      if (best == row.true_label.id) ++d.known_ties_resolved_correctly;
    }
  }
  return d;
}

const GroupHistogram* MagnitudeHistogram::find(ClassLabel::Kind group) const {
  for (const auto& g : groups) {
    if (g.group == group) return &g;
  }
  return nullptr;
}

MagnitudeHistogram magnitude_histogram(std::span<const ProbeFeature> features,
                                       std::size_t bins) {
  if (bins < 2) throw ContractViolation("magnitude histogram needs at least 2 bins");
  if (features.empty()) throw UndefinedMetricError("magnitude histogram of no features");

  std::vector<double> norms(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    double sq = 0.0;
    for (float x : features[i].feature) sq += static_cast<double>(x) * x;
    norms[i] = std::sqrt(sq);
  }
  double lo = *std::min_element(norms.begin(), norms.end());
  double hi = *std::max_element(norms.begin(), norms.end());
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  MagnitudeHistogram h;
  h.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + width * static_cast<double>(b);
  h.edges.back() = hi;

  constexpr ClassLabel::Kind kOrder[] = {ClassLabel::Kind::kKnown, ClassLabel::Kind::kNegative,
                                         ClassLabel::Kind::kUnknown,
                                         ClassLabel::Kind::kBackground};
  for (auto kind : kOrder) {
    GroupHistogram g;
    g.group = kind;
    g.counts.assign(bins, 0);
    std::vector<double> members;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].true_label.kind != kind) continue;
      members.push_back(norms[i]);
      auto bin = static_cast<std::size_t>((norms[i] - lo) / width);
      g.counts[std::min(bin, bins - 1)] += 1;
    }
    if (members.empty()) continue;
    g.size = members.size();
    std::sort(members.begin(), members.end());
    const std::size_t mid = members.size() / 2;
    g.median = members.size() % 2 ? members[mid] : 0.5 * (members[mid - 1] + members[mid]);
    h.groups.push_back(std::move(g));
  }
  return h;
}

std::string curve_to_csv(const OpenSetCurve& curve) {
  std::string out = "theta,fpir,tpir\n";
  for (const auto& p : curve.points) {
    out += fmt(p.theta) + "," + fmt(p.fpir) + "," + fmt(p.tpir) + "\n";
  }
  return out;
}

std::string table_to_csv(std::span<const OperatingPoint> table) {
  std::string out = "fpir_target,tpir\n";
  for (const auto& op : table) {
    out += fmt(op.fpir_target) + "," + (op.tpir ? fmt(*op.tpir) : std::string("n/a")) + "\n";
  }
  return out;
}

std::string histogram_to_csv(const MagnitudeHistogram& hist) {
  std::string out = "group,bin_lo,bin_hi,count\n";
  for (const auto& g : hist.groups) {
    for (std::size_t b = 0; b < g.counts.size(); ++b) {
      out += std::string(label_group_name(g.group)) + "," + fmt(hist.edges[b]) + "," +
             fmt(hist.edges[b + 1]) + "," + std::to_string(g.counts[b]) + "\n";
    }
  }
  return out;
}

}  // namespace oswatch
