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

#include "oswatch/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "binary_io.hpp"
#include "oswatch/error.hpp"
#include "oswatch/random.hpp"

namespace oswatch {
namespace {

constexpr char kOsefMagic[4] = {'O', 'S', 'E', 'F'};
constexpr std::uint32_t kOsefVersion = 1;

bool all_finite(const std::vector<float>& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

std::string format_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<double> random_direction(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  while (norm < 1e-6) {
    norm = 0.0;
    for (double& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
  }
  for (double& x : v) x /= norm;
  return v;
}

std::vector<float> draw_sample(Rng& rng, const std::vector<double>& mean, double sigma) {
  std::vector<float> v(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    v[i] = static_cast<float>(mean[i] + sigma * rng.normal());
  }
  return v;
}

// Random directions tried per class mean.
constexpr std::size_t kSpacingCandidates = 64;

void check_synth_config(const SynthConfig& c) {
  if (c.num_known < 2) throw UsageError("synthetic data needs at least 2 known classes");
  if (c.per_class < 4) throw UsageError("synthetic data needs at least 4 samples per class");
  if (c.dim < 2) throw UsageError("synthetic data needs dimension >= 2");
  if (!(c.spread > 0.0) || !std::isfinite(c.spread)) {
    throw UsageError("synthetic spread must be positive and finite");
  }
}

}  // namespace

std::int32_t ClassLabel::encode() const {
  switch (kind) {
    case Kind::kKnown:
      return static_cast<std::int32_t>(id);
    case Kind::kNegative:
      return -1;
    case Kind::kUnknown:
      return -2;
    case Kind::kBackground:
      return -3;
  }
  return -1;
}

ClassLabel ClassLabel::decode(std::int32_t code) {
  if (code >= 0) return known(static_cast<std::uint32_t>(code));
  switch (code) {
    case -1:
      return negative();
    case -2:
      return unknown();
    case -3:
      return background();
    default:
      throw FormatError("invalid label code " + std::to_string(code));
  }
}

std::string_view label_group_name(ClassLabel::Kind kind) {
  switch (kind) {
    case ClassLabel::Kind::kKnown:
      return "known";
    case ClassLabel::Kind::kNegative:
      return "negative";
    case ClassLabel::Kind::kUnknown:
      return "unknown";
    case ClassLabel::Kind::kBackground:
      return "background";
  }
  return "?";
}

void validate(const Dataset& dataset) {
  if (dataset.dim == 0) throw ContractViolation("dataset dimension must be positive");
  std::vector<bool> seen;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const EmbeddingRecord& r = dataset.records[i];
    if (r.vector.size() != dataset.dim) {
      throw ContractViolation("record " + std::to_string(i) + " has length " +
                              std::to_string(r.vector.size()) + ", dataset dimension is " +
                              std::to_string(dataset.dim));
    }
    if (!all_finite(r.vector)) {
      throw DataError("record " + std::to_string(i) + " contains a non-finite value");
    }
    if (r.label.is_known()) {
      if (r.label.id >= seen.size()) seen.resize(r.label.id + 1, false);
      seen[r.label.id] = true;
    }
  }
  if (seen.size() != dataset.num_known) {
    throw ContractViolation("num_known is " + std::to_string(dataset.num_known) +
                            " but the largest known id is " +
                            std::to_string(static_cast<long long>(seen.size()) - 1));
  }
  const auto hole = std::find(seen.begin(), seen.end(), false);
  if (hole != seen.end()) {
    throw DataError("known ids are not dense: id " + std::to_string(hole - seen.begin()) +
                    " has no records");
  }
}

Dataset Dataset::from_records(std::size_t dim, std::vector<EmbeddingRecord> records) {
  Dataset d;
  d.dim = dim;
  d.records = std::move(records);
  for (const auto& r : d.records) {
    if (r.label.is_known()) d.num_known = std::max<std::size_t>(d.num_known, r.label.id + 1);
  }
  validate(d);
  return d;
}

FileFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? FileFormat::kCsv : FileFormat::kBinary;
}

std::vector<std::uint8_t> encode_osef(const Dataset& dataset) {
  validate(dataset);
  detail::ByteWriter w;
  w.bytes(kOsefMagic, 4);
  w.uint<std::uint32_t>(kOsefVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(dataset.dim));
  w.uint<std::uint64_t>(dataset.records.size());
  for (const auto& r : dataset.records) {
    w.i32(r.label.encode());
    for (float x : r.vector) w.f32(x);
  }
  return std::move(w.buffer());
}

Dataset decode_osef(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes, "OSEF");
  if (r.bytes(4) != std::string(kOsefMagic, 4)) {
    throw FormatError("OSEF: bad magic at byte offset 0");
  }
  const std::size_t version_offset = r.offset();
  const auto version = r.uint<std::uint32_t>();
  if (version != kOsefVersion) {
    throw FormatError("OSEF: unsupported version " + std::to_string(version) +
                      " at byte offset " + std::to_string(version_offset));
  }
  const std::size_t dim_offset = r.offset();
  const auto dim = r.uint<std::uint32_t>();
  const auto count = r.uint<std::uint64_t>();
  if (dim == 0) {
    throw FormatError("OSEF: zero dimension at byte offset " + std::to_string(dim_offset));
  }
  const std::uint64_t record_bytes = 4ULL + 4ULL * dim;
  if (count > r.remaining() / record_bytes) {
    throw FormatError("OSEF: header declares " + std::to_string(count) + " records of dim " +
                      std::to_string(dim) + " but only " + std::to_string(r.remaining()) +
                      " bytes follow the header at byte offset " + std::to_string(r.offset()));
  }
  std::vector<EmbeddingRecord> records(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t label_offset = r.offset();
    try {
      records[i].label = ClassLabel::decode(r.i32());
    } catch (const FormatError& e) {
      throw FormatError(std::string("OSEF: ") + e.what() + " at byte offset " +
                        std::to_string(label_offset));
    }
    records[i].vector.resize(dim);
    for (float& x : records[i].vector) x = r.f32();
    if (!all_finite(records[i].vector)) {
      throw DataError("OSEF: record " + std::to_string(i) + " contains a non-finite value");
    }
  }
  if (r.remaining() != 0) {
    throw FormatError("OSEF: " + std::to_string(r.remaining()) +
                      " trailing bytes at byte offset " + std::to_string(r.offset()));
  }
  return Dataset::from_records(dim, std::move(records));
}

std::string encode_csv(const Dataset& dataset) {
  validate(dataset);
  std::string out = "label";
  for (std::size_t i = 0; i < dataset.dim; ++i) out += ",f" + std::to_string(i);
  out += '\n';
  for (const auto& r : dataset.records) {
    out += std::to_string(r.label.encode());
    for (float x : r.vector) {
      out += ',';
      out += format_float(x);
    }
    out += '\n';
  }
  return out;
}

Dataset decode_csv(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t dim = 0;
  std::vector<EmbeddingRecord> records;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (dim == 0) {
      if (trim(fields[0]) != "label" || fields.size() < 2) {
        throw FormatError("CSV line " + std::to_string(line_no) +
                          ": expected header \"label,f0,...\"");
      }
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (trim(fields[i]) != "f" + std::to_string(i - 1)) {
          throw FormatError("CSV line " + std::to_string(line_no) + ": header column " +
                            std::to_string(i) + " should be f" + std::to_string(i - 1));
        }
      }
      dim = fields.size() - 1;
      continue;
    }
    if (fields.size() != dim + 1) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dim + 1) + " fields, found " +
                        std::to_string(fields.size()));
    }
    EmbeddingRecord rec;
    std::int32_t code = 0;
    if (!parse_number(fields[0], code)) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": bad label");
    }
    try {
      rec.label = ClassLabel::decode(code);
    } catch (const FormatError& e) {
      throw FormatError("CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    rec.vector.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_number(fields[i + 1], rec.vector[i])) {
        throw FormatError("CSV line " + std::to_string(line_no) + ": bad value in column " +
                          std::to_string(i + 1));
      }
    }
    if (!all_finite(rec.vector)) {
      throw DataError("CSV record " + std::to_string(records.size()) + " (line " +
                      std::to_string(line_no) + ") contains a non-finite value");
    }
    records.push_back(std::move(rec));
  }
  if (dim == 0) throw FormatError("CSV: missing header line");
  return Dataset::from_records(dim, std::move(records));
}

Dataset read_embeddings(const std::filesystem::path& path, FileFormat format) {
  if (format == FileFormat::kBinary) return decode_osef(detail::read_file_bytes(path));
  return decode_csv(detail::read_file_text(path));
}

void write_embeddings(const Dataset& dataset, const std::filesystem::path& path,
                      FileFormat format) {
  // Encoding validates first, so an invalid dataset never touches the disk.
  if (format == FileFormat::kBinary) {
    detail::write_file_bytes(path, encode_osef(dataset));
  } else {
    detail::write_file_text(path, encode_csv(dataset));
  }
}

SynthCentroids synth_centroids(const SynthConfig& config) {
  check_synth_config(config);
  Rng rng(Rng::mix(config.seed, 0));
  // Directions already in use on any shell; each new mean takes the
  // candidate direction farthest (in angle) from all of them.
  std::vector<std::vector<double>> used;
  SynthCentroids c;
  auto place = [&](std::size_t count, double radius, std::vector<std::vector<double>>& out) {
    for (std::size_t k = 0; k < count; ++k) {
      std::vector<double> best;
      double best_cos = 2.0;
      for (std::size_t t = 0; t < kSpacingCandidates; ++t) {
        auto dir = random_direction(rng, config.dim);
        double worst = -1.0;
        for (const auto& u : used) {
          double dot = 0.0;
          for (std::size_t i = 0; i < dir.size(); ++i) dot += dir[i] * u[i];
          worst = std::max(worst, dot);
        }
        if (worst < best_cos) {
          best_cos = worst;
          best = std::move(dir);
        }
      }
      used.push_back(best);
      for (double& x : best) x *= radius * config.spread;
      out.push_back(std::move(best));
    }
  };
  place(config.num_known, kKnownShellRadius, c.known);
  place(config.negative_classes, kNegativeShellRadius, c.negative);
  place(config.unknown_classes, kUnknownShellRadius, c.unknown);
  return c;
}

SynthSplits synth_openset(const SynthConfig& config) {
  const SynthCentroids centroids = synth_centroids(config);
  const double sigma = config.spread;
  Rng rng(Rng::mix(config.seed, 1));

  std::vector<EmbeddingRecord> train, val, probe;
  auto split_class = [&](const std::vector<double>& mean, ClassLabel label) {
    for (std::size_t i = 0; i < config.per_class; ++i) {
      EmbeddingRecord rec{label, draw_sample(rng, mean, sigma)};
      (i % 5 == 4 ? val : train).push_back(std::move(rec));
    }
  };
  for (std::size_t k = 0; k < config.num_known; ++k) {
    split_class(centroids.known[k], ClassLabel::known(static_cast<std::uint32_t>(k)));
  }
  for (const auto& mean : centroids.negative) split_class(mean, ClassLabel::negative());
  for (std::size_t k = 0; k < config.num_known; ++k) {
    for (std::size_t i = 0; i < config.per_class; ++i) {
      probe.push_back({ClassLabel::known(static_cast<std::uint32_t>(k)),
                       draw_sample(rng, centroids.known[k], sigma)});
    }
  }
  for (const auto& mean : centroids.unknown) {
    for (std::size_t i = 0; i < config.per_class; ++i) {
      probe.push_back({ClassLabel::unknown(), draw_sample(rng, mean, sigma)});
    }
  }
  return {Dataset::from_records(config.dim, std::move(train)),
          Dataset::from_records(config.dim, std::move(val)),
          Dataset::from_records(config.dim, std::move(probe))};
}

}  // namespace oswatch
