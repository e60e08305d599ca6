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

#include "oswatch/gallery.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>

#include "oswatch/error.hpp"

namespace oswatch {
namespace {

template <typename T>
double norm_of(std::span<const T> v) {
  double sq = 0.0;
  for (T x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sq);
}

template <typename T>
double cosine_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw ContractViolation("cosine: vectors of length " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  const double na = norm_of(a);
  const double nb = norm_of(b);
  if (na < kMinFeatureNorm || nb < kMinFeatureNorm) {
    throw DegenerateFeatureError("cosine: vector norm below 1e-12");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

// Neumaier-compensated running mean of unit vectors.
class UnitMean {
 public:
  explicit UnitMean(std::size_t dim) : sum_(dim, 0.0), comp_(dim, 0.0) {}

  void add(std::span<const float> v, double norm) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = static_cast<double>(v[i]) / norm;
      const double t = sum_[i] + x;
      if (std::abs(sum_[i]) >= std::abs(x)) {
        comp_[i] += (sum_[i] - t) + x;
      } else {
        comp_[i] += (x - t) + sum_[i];
      }
      sum_[i] = t;
    }
    ++count_;
  }

  std::size_t count() const { return count_; }

  std::vector<float> mean() const {
    std::vector<float> out(sum_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<float>((sum_[i] + comp_[i]) / static_cast<double>(count_));
    }
    return out;
  }

 private:
  std::vector<double> sum_, comp_;
  std::size_t count_ = 0;
};

std::string format_score(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ProbeFeature extract_compact(const AdapterParams& params, const EmbeddingRecord& record) {
  auto trace = forward<float>(params, record.vector);
  return {record.label, std::move(trace.h2)};
}

std::vector<ProbeFeature> extract_compact(const AdapterParams& params, const Dataset& dataset) {
  if (dataset.dim != params.input_dim()) {
    throw ContractViolation("data dimension " + std::to_string(dataset.dim) +
                            " does not match model input dimension " +
                            std::to_string(params.input_dim()));
  }
  std::vector<ProbeFeature> out;
  out.reserve(dataset.size());
  for (const auto& r : dataset.records) out.push_back(extract_compact(params, r));
  return out;
}

std::vector<ProbeFeature> raw_features(const Dataset& dataset) {
  std::vector<ProbeFeature> out;
  out.reserve(dataset.size());
  for (const auto& r : dataset.records) out.push_back({r.label, r.vector});
  return out;
}

double cosine(std::span<const float> a, std::span<const float> b) { return cosine_impl(a, b); }
double cosine(std::span<const double> a, std::span<const double> b) {
  return cosine_impl(a, b);
}

Gallery enroll(std::span<const ProbeFeature> features, bool with_garbage) {
  if (features.empty()) throw ContractViolation("enroll: no gallery records");
  const std::size_t dim = features.front().feature.size();
  std::map<std::uint32_t, UnitMean> per_id;
  UnitMean garbage(dim);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const ProbeFeature& f = features[i];
    if (f.feature.size() != dim) {
      throw ContractViolation("enroll: record " + std::to_string(i) + " has dimension " +
                              std::to_string(f.feature.size()) + ", expected " +
                              std::to_string(dim));
    }
    const bool is_garbage = f.true_label.is_negative();
    if (!f.true_label.is_known() && !(is_garbage && with_garbage)) {
      throw ContractViolation("enroll: record " + std::to_string(i) + " is a " +
                              std::string(label_group_name(f.true_label.kind)) + " sample");
    }
    const double n = norm_of<float>(f.feature);
    if (!(n >= kMinFeatureNorm)) {
      throw DegenerateFeatureError("enroll: record " + std::to_string(i) +
                                   " has a feature norm below 1e-12");
    }
    if (is_garbage) {
      garbage.add(f.feature, n);
    } else {
      per_id.try_emplace(f.true_label.id, dim).first->second.add(f.feature, n);
    }
  }
  Gallery g;
  std::uint32_t expected = 0;
  for (const auto& [id, acc] : per_id) {
    if (id != expected) {
      throw ContractViolation("enroll: known id " + std::to_string(expected) +
                              " has no enrollment samples");
    }
    g.entries.push_back({id, acc.mean(), acc.count()});
    ++expected;
  }
  if (g.entries.empty()) throw ContractViolation("enroll: no known records");
  if (with_garbage) {
    if (garbage.count() == 0) {
      throw ContractViolation("enroll: garbage template requested but no negative records");
    }
    g.garbage = GalleryEntry{static_cast<std::uint32_t>(g.entries.size()), garbage.mean(),
                             garbage.count()};
  }
  return g;
}

Gallery enroll(const AdapterParams& params, const Dataset& gallery_records, bool with_garbage) {
  const auto features = extract_compact(params, gallery_records);
  return enroll(features, with_garbage);
}

ScoreMatrix score_probes(const Gallery& gallery, std::span<const ProbeFeature> probes) {
  ScoreMatrix m;
  m.num_known = gallery.size();
  m.has_garbage = gallery.has_garbage();
  m.rows.reserve(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const ProbeFeature& probe = probes[p];
    if (probe.feature.size() != gallery.dim()) {
      throw ContractViolation("score: probe " + std::to_string(p) + " has dimension " +
                              std::to_string(probe.feature.size()) + ", gallery has " +
                              std::to_string(gallery.dim()));
    }
    ScoreRow row;
    row.true_label = probe.true_label;
    if (!(norm_of<float>(probe.feature) >= kMinFeatureNorm)) {
      row.degenerate = true;
      row.scores.assign(gallery.size(), std::nan(""));
      if (gallery.has_garbage()) row.garbage = std::nan("");
      ++m.degenerate_rows;
    } else {
      row.scores.reserve(gallery.size());
      for (const auto& e : gallery.entries) row.scores.push_back(cosine(e.templ, probe.feature));
      if (gallery.has_garbage()) row.garbage = cosine(gallery.garbage->templ, probe.feature);
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

std::uint32_t best_known(const ScoreRow& row) {
  std::uint32_t best = 0;
  for (std::uint32_t g = 1; g < row.scores.size(); ++g) {
    if (row.scores[g] > row.scores[best]) best = g;
  }
  return best;
}

Decision classify(const ScoreRow& row, double theta) {
  if (row.scores.empty()) throw ContractViolation("classify: empty score row");
  if (row.degenerate) return Decision::reject();
  const std::uint32_t g = best_known(row);
  const double s = row.scores[g];
  if (!(s >= theta)) return Decision::reject();
  if (row.garbage && *row.garbage > s) return Decision::reject();
  return Decision::accept(g);
}

void save_gallery(const Gallery& gallery, const std::filesystem::path& path) {
  Dataset d;
  d.dim = gallery.dim();
  d.num_known = gallery.size();
  for (const auto& e : gallery.entries) d.records.push_back({ClassLabel::known(e.id), e.templ});
  if (gallery.garbage) d.records.push_back({ClassLabel::negative(), gallery.garbage->templ});
  write_embeddings(d, path, FileFormat::kBinary);
}

Gallery load_gallery(const std::filesystem::path& path) {
  const Dataset d = read_embeddings(path, FileFormat::kBinary);
  Gallery g;
  g.entries.resize(d.num_known);
  std::vector<bool> seen(d.num_known, false);
  for (const auto& r : d.records) {
    if (r.label.is_known()) {
      if (seen[r.label.id]) {
        throw FormatError("gallery file lists id " + std::to_string(r.label.id) + " twice");
      }
      seen[r.label.id] = true;
      g.entries[r.label.id] = {r.label.id, r.vector, 1};
    } else if (r.label.is_negative() && !g.garbage) {
      g.garbage = GalleryEntry{static_cast<std::uint32_t>(d.num_known), r.vector, 1};
    } else {
      throw FormatError("gallery file holds an unexpected " +
                        std::string(label_group_name(r.label.kind)) + " record");
    }
  }
  if (g.entries.empty()) throw FormatError("gallery file holds no templates");
  return g;
}

std::string score_matrix_to_csv(const ScoreMatrix& scores) {
  std::string out = "true_label";
  for (std::size_t g = 0; g < scores.num_known; ++g) out += ",s" + std::to_string(g);
  if (scores.has_garbage) out += ",garbage";
  out += '\n';
  for (const auto& row : scores.rows) {
    out += std::to_string(row.true_label.encode());
    for (double s : row.scores) out += "," + (row.degenerate ? "nan" : format_score(s));
    if (scores.has_garbage) {
      out += "," + (row.degenerate ? std::string("nan") : format_score(row.garbage.value()));
    }
    out += '\n';
  }
  return out;
}

ScoreMatrix score_matrix_from_csv(std::string_view text) {
  ScoreMatrix m;
  bool header = true;
  std::size_t columns = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    for (std::size_t start = 0;;) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    const std::string where = "score CSV line " + std::to_string(line_no);
    if (header) {
      if (fields.front() != "true_label" || fields.size() < 2) {
        throw FormatError(where + ": expected header \"true_label,s0,...\"");
      }
      m.has_garbage = fields.back() == "garbage";
      m.num_known = fields.size() - 1 - (m.has_garbage ? 1 : 0);
      for (std::size_t g = 0; g < m.num_known; ++g) {
        if (fields[g + 1] != "s" + std::to_string(g)) {
          throw FormatError(where + ": header column " + std::to_string(g + 1) +
                            " should be s" + std::to_string(g));
        }
      }
      if (m.num_known == 0) throw FormatError(where + ": no score columns");
      columns = fields.size();
      header = false;
      continue;
    }
    if (fields.size() != columns) {
      throw FormatError(where + ": expected " + std::to_string(columns) + " fields, found " +
                        std::to_string(fields.size()));
    }
    ScoreRow row;
    std::int32_t code = 0;
    auto [p, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), code);
    if (ec != std::errc() || p != fields[0].data() + fields[0].size()) {
      throw FormatError(where + ": bad label");
    }
    try {
      row.true_label = ClassLabel::decode(code);
    } catch (const FormatError& e) {
      throw FormatError(where + ": " + e.what());
    }
    std::vector<double> values(columns - 1);
    std::size_t nans = 0;
    for (std::size_t i = 1; i < columns; ++i) {
      const std::string_view f = fields[i];
      auto [q, ec2] = std::from_chars(f.data(), f.data() + f.size(), values[i - 1]);
      if (ec2 != std::errc() || q != f.data() + f.size()) {
        throw FormatError(where + ": bad score in column " + std::to_string(i));
      }
      if (std::isnan(values[i - 1])) {
        ++nans;
      } else if (!std::isfinite(values[i - 1])) {
        throw DataError(where + ": infinite score");
      }
    }
    if (nans != 0 && nans != values.size()) {
      throw DataError(where + ": nan must fill the whole row of a degenerate probe");
    }
    row.degenerate = nans != 0;
    if (row.degenerate) ++m.degenerate_rows;
    if (m.has_garbage) {
      row.garbage = values.back();
      values.pop_back();
    }
    row.scores = std::move(values);
    m.rows.push_back(std::move(row));
  }
  if (header) throw FormatError("score CSV: missing header line");
  return m;
}

}  // namespace oswatch
