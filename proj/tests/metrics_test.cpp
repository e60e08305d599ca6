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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "oswatch/error.hpp"

namespace oswatch {
namespace {

TEST(Rates, HandCase) {
  const ScoreMatrix m = oracle::hand_case();
  EXPECT_DOUBLE_EQ(tpir(m, 0.6), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(fpir(m, 0.6), 0.5);
  EXPECT_DOUBLE_EQ(fpir(m, 0.45), 1.0);
  EXPECT_DOUBLE_EQ(tpir(m, 0.85), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(fpir(m, 0.85), 0.0);
  // The third probe's best id is wrong, so no threshold recovers it.
  EXPECT_DOUBLE_EQ(tpir(m, -1.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(tpir(m, 1.0), 0.0);
}

TEST(Rates, Errors) {
  ScoreMatrix m = oracle::hand_case();
  ScoreMatrix knowns_only = m;
  knowns_only.rows.resize(3);
  EXPECT_THROW(fpir(knowns_only, 0.5), UndefinedMetricError);
  EXPECT_THROW(oroc_curve(knowns_only), UndefinedMetricError);
  ScoreMatrix impostors_only = m;
  impostors_only.rows.erase(impostors_only.rows.begin(), impostors_only.rows.begin() + 3);
  EXPECT_THROW(tpir(impostors_only, 0.5), UndefinedMetricError);
  m.rows[3].true_label = ClassLabel::negative();
  EXPECT_THROW(tpir(m, 0.5), DataError);
}

TEST(Curve, HandCasePoints) {
  const OpenSetCurve c = oroc_curve(oracle::hand_case());
  ASSERT_EQ(c.points.size(), 6u);
  EXPECT_GT(c.points[0].theta, 0.9);
  EXPECT_EQ(c.points[0].fpir, 0.0);
  EXPECT_EQ(c.points[0].tpir, 0.0);
  const double thetas[] = {0.9, 0.8, 0.7, 0.6, 0.5};
  const double fpirs[] = {0.0, 0.0, 0.5, 0.5, 1.0};
  const double tpirs[] = {1.0 / 3, 2.0 / 3, 2.0 / 3, 2.0 / 3, 2.0 / 3};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(c.points[i + 1].theta, thetas[i]);
    EXPECT_DOUBLE_EQ(c.points[i + 1].fpir, fpirs[i]);
    EXPECT_DOUBLE_EQ(c.points[i + 1].tpir, tpirs[i]);
  }
}

TEST(Curve, PerfectSeparation) {
  ScoreMatrix m;
  m.num_known = 2;
  m.rows.push_back({ClassLabel::known(0), {0.9, 0.1}, {}, false});
  m.rows.push_back({ClassLabel::known(1), {0.2, 0.8}, {}, false});
  m.rows.push_back({ClassLabel::unknown(), {0.3, 0.1}, {}, false});
  m.rows.push_back({ClassLabel::background(), {0.2, 0.25}, {}, false});
  const OpenSetCurve c = oroc_curve(m);
  bool full_tpir_at_zero_fpir = false;
  for (const auto& p : c.points) full_tpir_at_zero_fpir |= p.fpir == 0.0 && p.tpir == 1.0;
  EXPECT_TRUE(full_tpir_at_zero_fpir);
  EXPECT_EQ(c.points.back().fpir, 1.0);
  const auto table = tpir_at_fpir(c, std::vector<double>{1.0, 0.5, 0.1});
  EXPECT_EQ(table[0].tpir, 1.0);
  EXPECT_EQ(table[1].tpir, 1.0);
  EXPECT_FALSE(table[2].tpir.has_value());
}

TEST(Curve, MatchesBruteForceOnLargeMatrix) {
  for (bool garbage : {false, true}) {
    const ScoreMatrix m = oracle::random_scores(garbage ? 2 : 1, 10000, 5, garbage);
    const OpenSetCurve c = oroc_curve(m);
    for (const auto& p : c.points) {
      const auto b = oracle::brute_rates(m, p.theta);
      EXPECT_DOUBLE_EQ(p.tpir, b.tpir) << "theta " << p.theta;
      EXPECT_DOUBLE_EQ(p.fpir, b.fpir) << "theta " << p.theta;
      EXPECT_DOUBLE_EQ(tpir(m, p.theta), b.tpir);
      EXPECT_DOUBLE_EQ(fpir(m, p.theta), b.fpir);
    }
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_LT(c.points[i].theta, c.points[i - 1].theta);
      EXPECT_GE(c.points[i].fpir, c.points[i - 1].fpir);
      EXPECT_GE(c.points[i].tpir, c.points[i - 1].tpir);
    }
  }
}

TEST(Curve, DegenerateRowsNeverAccepted) {
  ScoreMatrix m = oracle::hand_case();
  m.rows.push_back({ClassLabel::unknown(), {NAN, NAN}, {}, true});
  m.degenerate_rows = 1;
  EXPECT_DOUBLE_EQ(fpir(m, -1.0), 2.0 / 3.0);
  const OpenSetCurve c = oroc_curve(m);
  EXPECT_EQ(c.num_impostor_rows, 3u);
  EXPECT_DOUBLE_EQ(c.points.back().fpir, 2.0 / 3.0);
}

TEST(Table, MostPermissiveAdmissibleThreshold) {
  const OpenSetCurve c = oroc_curve(oracle::hand_case());
  const auto table = tpir_at_fpir(c, kTableFpirTargets);
  ASSERT_EQ(table.size(), 4u);
  EXPECT_DOUBLE_EQ(*table[0].tpir, 2.0 / 3.0);
  EXPECT_EQ(*table[0].theta, 0.5);
  // Two impostors cannot resolve FPIR below 1/2.
  for (std::size_t i = 1; i < 4; ++i) EXPECT_FALSE(table[i].tpir.has_value());
  const auto half = tpir_at_fpir(c, std::vector<double>{0.5});
  EXPECT_EQ(*half[0].theta, 0.6);
  EXPECT_DOUBLE_EQ(*half[0].tpir, 2.0 / 3.0);
  EXPECT_EQ(table_to_csv(table),
            "fpir_target,tpir\n1,0.66666666666666663\n0.10000000000000001,n/a\n"
            "0.01,n/a\n0.001,n/a\n");
}

TEST(Table, TpirNonDecreasingInTarget) {
  const ScoreMatrix m = oracle::random_scores(5, 3000, 4, false);
  const OpenSetCurve c = oroc_curve(m);
  const std::vector<double> targets = {0.01, 0.05, 0.1, 0.3, 1.0};
  const auto table = tpir_at_fpir(c, targets);
  double prev = -1.0;
  for (const auto& op : table) {
    ASSERT_TRUE(op.tpir.has_value());
    EXPECT_GE(*op.tpir, prev);
    EXPECT_LE(fpir(m, *op.theta), op.fpir_target);
    prev = *op.tpir;
  }
}

TEST(Garbage, InertColumnChangesNothing) {
  ScoreMatrix plain = oracle::random_scores(9, 2000, 3, false);
  ScoreMatrix inert = plain;
  inert.has_garbage = true;
  for (auto& row : inert.rows) row.garbage = -2.0;
  const OpenSetCurve a = oroc_curve(plain), b = oroc_curve(inert);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].theta, b.points[i].theta);
    EXPECT_EQ(a.points[i].fpir, b.points[i].fpir);
    EXPECT_EQ(a.points[i].tpir, b.points[i].tpir);
  }
}

TEST(Diagnostics, CountsTies) {
  ScoreMatrix m = oracle::hand_case();
  m.rows.push_back({ClassLabel::known(0), {0.5, 0.5}, {}, false});
  m.rows.push_back({ClassLabel::known(1), {0.5, 0.5}, {}, false});
  const EvalDiagnostics d = diagnose(m);
  EXPECT_EQ(d.known_ties, 2u);
  EXPECT_EQ(d.known_ties_resolved_correctly, 1u);
}

TEST(Histogram, BinsAndMedians) {
  std::vector<ProbeFeature> f;
  for (float n : {1.0f, 2.0f, 3.0f, 4.0f}) f.push_back({ClassLabel::known(0), {n, 0.0f}});
  for (float n : {0.0f, 0.5f, 1.0f}) f.push_back({ClassLabel::negative(), {0.0f, n}});
  const MagnitudeHistogram h = magnitude_histogram(f, 4);
  ASSERT_EQ(h.edges.size(), 5u);
  EXPECT_EQ(h.edges.front(), 0.0);
  EXPECT_EQ(h.edges.back(), 4.0);
  ASSERT_EQ(h.groups.size(), 2u);
  const GroupHistogram* known = h.find(ClassLabel::Kind::kKnown);
  const GroupHistogram* neg = h.find(ClassLabel::Kind::kNegative);
  ASSERT_TRUE(known && neg);
  EXPECT_EQ(h.find(ClassLabel::Kind::kUnknown), nullptr);
  EXPECT_DOUBLE_EQ(known->median, 2.5);
  EXPECT_DOUBLE_EQ(neg->median, 0.5);
  EXPECT_EQ(known->counts, (std::vector<std::size_t>{0, 1, 1, 2}));
  EXPECT_EQ(neg->counts, (std::vector<std::size_t>{2, 1, 0, 0}));
  std::size_t total = 0;
  for (const auto& g : h.groups) {
    for (std::size_t c : g.counts) total += c;
  }
  EXPECT_EQ(total, f.size());
}

TEST(Histogram, ConstantMagnitudesAndErrors) {
  std::vector<ProbeFeature> f(3, ProbeFeature{ClassLabel::unknown(), {3.0f, 4.0f}});
  const MagnitudeHistogram h = magnitude_histogram(f, 10);
  EXPECT_DOUBLE_EQ(h.edges.front(), 4.5);
  EXPECT_DOUBLE_EQ(h.edges.back(), 5.5);
  EXPECT_EQ(h.groups[0].counts[5], 3u);
  EXPECT_THROW(magnitude_histogram(f, 1), ContractViolation);
  EXPECT_THROW(magnitude_histogram(std::vector<ProbeFeature>{}, 10), UndefinedMetricError);
}

}  // namespace
}  // namespace oswatch
