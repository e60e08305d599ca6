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

#include "oswatch/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>

#include "binary_io.hpp"
#include "oswatch/error.hpp"
#include "oswatch/gallery.hpp"
#include "oswatch/metrics.hpp"

namespace oswatch {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

Dataset load_data(const fs::path& path) { return read_embeddings(path, format_for_path(path)); }

LossVariant parse_loss_or_throw(const std::string& name) {
  if (auto v = parse_loss_name(name)) return *v;
  throw UsageError("unknown loss '" + name +
                   "'; expected softmax, garbage, entropic, objectosphere or maxentropy");
}

void check_model_dim(const Model& model, const Dataset& data, const fs::path& data_path) {
  if (model.params.input_dim() != data.dim) {
    throw DataError("dimension mismatch: model expects " +
                    std::to_string(model.params.input_dim()) + "-dimensional input, " +
                    data_path.string() + " holds " + std::to_string(data.dim) +
                    "-dimensional embeddings");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct SynthArgs {
  SynthConfig config;
  std::string out;
  std::string format = "binary";
};

struct TrainArgs {
  std::string config;
  std::string train, val, out;
  std::string loss;
  double margin = 0, xi = 0, lambda = 0, lr = 0, momentum = 0;
  std::size_t epochs = 0, batch_size = 0, h1 = 0, h2 = 0, val_every = 0;
  std::uint64_t seed = 0;
};

struct EnrollArgs {
  std::string model, gallery, out;
  bool baseline = false;
};

struct ScoreArgs {
  std::string model, templates, probe, out;
  bool baseline = false;
};

struct EvalArgs {
  std::string scores, out;
};

struct HistArgs {
  std::string model, data, out;
  std::size_t bins = 20;
  bool baseline = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SynthSplits splits = synth_openset(a.config);
  const fs::path dir(a.out);
  ensure_dir(dir);
  const bool csv = a.format == "csv";
  const FileFormat format = csv ? FileFormat::kCsv : FileFormat::kBinary;
  const char* ext = csv ? ".csv" : ".osef";
  const std::pair<const char*, const Dataset*> parts[] = {
      {"train", &splits.train}, {"val", &splits.val}, {"probe", &splits.probe}};
  for (const auto& [name, data] : parts) {
    write_embeddings(*data, dir / (std::string(name) + ext), format);
  }
  for (const auto& [name, data] : parts) {
    std::size_t known = 0, negative = 0, unknown = 0;
    for (const auto& r : data->records) {
      known += r.label.is_known();
      negative += r.label.is_negative();
      unknown += r.label.is_impostor();
    }
    out << name << ext << ": " << data->size() << " records (known " << known << ", negative "
        << negative << ", unknown " << unknown << "), " << data->num_known << " known ids\n";
  }
  out << "known ids: 0.." << a.config.num_known - 1 << "\n";
  return 0;
}

int cmd_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out) {
  ExperimentConfig cfg;
  if (!a.config.empty()) cfg = ExperimentConfig::from_json(detail::read_file_text(a.config));
  auto given = [&](const char* flag) { return sub.count(flag) > 0; };
  TrainConfig& t = cfg.train;
  if (given("--train")) cfg.train_path = a.train;
  if (given("--val")) cfg.val_path = a.val;
  if (given("--out")) cfg.out_dir = a.out;
  if (given("--loss")) t.loss.variant = parse_loss_or_throw(a.loss);
  if (given("--margin")) t.loss.margin = a.margin;
  if (given("--xi")) t.loss.xi = a.xi;
  if (given("--lambda")) t.loss.lambda = a.lambda;
  if (given("--epochs")) t.epochs = a.epochs;
  if (given("--batch-size")) t.batch_size = a.batch_size;
  if (given("--lr")) t.learning_rate = a.lr;
  if (given("--momentum")) t.momentum = a.momentum;
  if (given("--seed")) t.seed = a.seed;
  if (given("--h1")) t.h1 = a.h1;
  if (given("--h2")) t.h2 = a.h2;
  if (given("--val-every")) t.val_every = a.val_every;
  if (!cfg.train_path) throw UsageError("train: no training set (--train or config key 'train')");
  if (!cfg.out_dir) throw UsageError("train: no output directory (--out or config key 'out')");
  try {
    t.check();
  } catch (const ContractViolation& e) {
    throw UsageError(std::string("train: ") + e.what());
  }

  const Dataset train_set = load_data(*cfg.train_path);
  const Dataset val_set = cfg.val_path ? load_data(*cfg.val_path) : train_set;
  out << "training " << loss_name(t.loss.variant) << " adapter: " << train_set.dim << " -> "
      << t.h1 << " -> " << t.h2 << " -> " << t.loss.num_outputs(train_set.num_known)
      << ", epochs " << t.epochs << ", margin " << t.loss.margin << ", xi " << t.loss.xi
      << ", lambda " << t.loss.lambda << "\n";
  const TrainResult result = train(train_set, val_set, t);
  ensure_dir(*cfg.out_dir);
  save_model({result.params, t.loss}, *cfg.out_dir / "model.osam");
  detail::write_file_text(*cfg.out_dir / "history.csv", result.history.to_csv());
  const EpochStats& last = result.history.epochs.back();
  out << "final epoch " << last.epoch << ": train_loss " << fmt(last.train_loss)
      << ", val_loss " << fmt(last.val_loss) << ", val_acc " << fmt(last.val_acc) << "\n";
  return 0;
}

std::vector<ProbeFeature> features_for(const std::string& model_path, bool baseline,
                                       const fs::path& data_path, const Dataset& data,
                                       std::optional<Model>& model) {
  if (baseline) return raw_features(data);
  model = load_model(model_path);
  check_model_dim(*model, data, data_path);
  return extract_compact(model->params, data);
}

int cmd_enroll(const EnrollArgs& a, std::ostream& out) {
  if (!a.baseline && a.model.empty()) throw UsageError("enroll: --model is required");
  Dataset data = load_data(a.gallery);
  std::optional<Model> model;
  const auto features = features_for(a.model, a.baseline, a.gallery, data, model);
  const bool garbage = model && model->loss.variant == LossVariant::kGarbage;
  std::vector<ProbeFeature> kept;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const ClassLabel& l = features[i].true_label;
    if (l.is_impostor()) {
      throw DataError("enroll: record " + std::to_string(i) + " is a " +
                      std::string(label_group_name(l.kind)) + " sample");
    }
    if (l.is_known() || garbage) kept.push_back(features[i]);
  }
  const Gallery gallery = enroll(kept, garbage);
  if (model && gallery.size() + (garbage ? 1 : 0) != model->params.num_outputs()) {
    throw DataError("enroll: gallery has " + std::to_string(gallery.size()) +
                    " identities but the model was trained for " +
                    std::to_string(model->params.num_outputs() - (garbage ? 1 : 0)));
  }
  save_gallery(gallery, a.out);
  out << "enrolled " << gallery.size() << " templates of dimension " << gallery.dim()
      << (garbage ? " plus a garbage template" : "") << "\n";
  return 0;
}

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  if (!a.baseline && a.model.empty()) throw UsageError("score: --model is required");
  const Gallery gallery = load_gallery(a.templates);
  const Dataset probes = load_data(a.probe);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    if (probes.records[i].label.is_negative()) {
      throw DataError("score: probe " + std::to_string(i) +
                      " is a negative sample; negatives are training-only");
    }
  }
  std::optional<Model> model;
  const auto features = features_for(a.model, a.baseline, a.probe, probes, model);
  if (!features.empty() && features.front().feature.size() != gallery.dim()) {
    throw DataError("dimension mismatch: probe features have " +
                    std::to_string(features.front().feature.size()) +
                    " dimensions, gallery templates have " + std::to_string(gallery.dim()));
  }
  const ScoreMatrix scores = score_probes(gallery, features);
  detail::write_file_text(a.out, score_matrix_to_csv(scores));
  out << "scored " << scores.rows.size() << " probes against " << scores.num_known
      << " templates" << (scores.has_garbage ? " (+garbage)" : "") << "; "
      << scores.degenerate_rows << " degenerate probes rejected\n";
  return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const ScoreMatrix scores = score_matrix_from_csv(detail::read_file_text(a.scores));
  const OpenSetCurve curve = oroc_curve(scores);
  const auto table = tpir_at_fpir(curve, kTableFpirTargets);
  const fs::path dir(a.out);
  ensure_dir(dir);
  detail::write_file_text(dir / "curve.csv", curve_to_csv(curve));
  detail::write_file_text(dir / "table.csv", table_to_csv(table));
  const EvalDiagnostics diag = diagnose(scores);
  out << "known probes " << curve.num_known_rows << ", unknown probes "
      << curve.num_impostor_rows << ", degenerate " << diag.degenerate_rows
      << ", known ties " << diag.known_ties << " (" << diag.known_ties_resolved_correctly
      << " resolved to the true id)\n";
  for (const auto& op : table) {
    out << "TPIR@FPIR=" << fmt(op.fpir_target) << ": "
        << (op.tpir ? fmt(*op.tpir) : std::string("n/a")) << "\n";
  }
  return 0;
}

int cmd_hist(const HistArgs& a, std::ostream& out) {
  if (!a.baseline && a.model.empty()) throw UsageError("hist: --model is required");
  const Dataset data = load_data(a.data);
  std::optional<Model> model;
  const auto features = features_for(a.model, a.baseline, a.data, data, model);
  const MagnitudeHistogram hist = magnitude_histogram(features, a.bins);
  detail::write_file_text(a.out, histogram_to_csv(hist));
  for (const auto& g : hist.groups) {
    out << label_group_name(g.group) << ": " << g.size << " features, median magnitude "
        << fmt(g.median) << "\n";
  }
  return 0;
}

template <typename T>
T json_get(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k = {
      "train", "val", "out", "loss", "margin", "xi", "lambda", "epochs",
      "batch-size", "lr", "momentum", "seed", "h1", "h2", "val-every"};
  return k;
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  ExperimentConfig c;
  TrainConfig& t = c.train;
  for (const auto& [key, value] : doc.items()) {
    if (key == "train") {
      c.train_path = json_get<std::string>(value, key);
    } else if (key == "val") {
      c.val_path = json_get<std::string>(value, key);
    } else if (key == "out") {
      c.out_dir = json_get<std::string>(value, key);
    } else if (key == "loss") {
      t.loss.variant = parse_loss_or_throw(json_get<std::string>(value, key));
    } else if (key == "margin") {
      t.loss.margin = json_get<double>(value, key);
    } else if (key == "xi") {
      t.loss.xi = json_get<double>(value, key);
    } else if (key == "lambda") {
      t.loss.lambda = json_get<double>(value, key);
    } else if (key == "epochs") {
      t.epochs = json_get<std::size_t>(value, key);
    } else if (key == "batch-size") {
      t.batch_size = json_get<std::size_t>(value, key);
    } else if (key == "lr") {
      t.learning_rate = json_get<double>(value, key);
    } else if (key == "momentum") {
      t.momentum = json_get<double>(value, key);
    } else if (key == "seed") {
      t.seed = json_get<std::uint64_t>(value, key);
    } else if (key == "h1") {
      t.h1 = json_get<std::size_t>(value, key);
    } else if (key == "h2") {
      t.h2 = json_get<std::size_t>(value, key);
    } else if (key == "val-every") {
      t.val_every = json_get<std::size_t>(value, key);
    } else {
      std::string valid;
      for (const auto& k : keys()) valid += (valid.empty() ? "" : ", ") + k;
      throw UsageError("unknown config key '" + key + "'; valid keys: " + valid);
    }
  }
  return c;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-set watchlist recognition on embedding vectors", "oswatch"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic open-set dataset");
  s->add_option("--seed", synth.config.seed, "Generator seed")->default_val(42);
  s->add_option("--known", synth.config.num_known, "Known classes (>= 2)")->default_val(10);
  s->add_option("--per-class", synth.config.per_class, "Samples per class (>= 4)")
      ->default_val(100);
  s->add_option("--dim", synth.config.dim, "Embedding dimension (>= 2)")->default_val(8);
  s->add_option("--negatives", synth.config.negative_classes, "Negative classes")
      ->default_val(10);
  s->add_option("--unknowns", synth.config.unknown_classes, "Unknown classes")->default_val(10);
  s->add_option("--spread", synth.config.spread, "Class spread")->default_val(1.0);
  s->add_option("--format", synth.format, "binary or csv")
      ->check(CLI::IsMember({"binary", "csv"}))
      ->default_val("binary");
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the adapter network");
  t->add_option("--config", tr.config, "JSON experiment config");
  t->add_option("--train", tr.train, "Training embeddings");
  t->add_option("--val", tr.val, "Validation embeddings (defaults to the training set)");
  t->add_option("--out", tr.out, "Output directory for model.osam and history.csv");
  t->add_option("--loss", tr.loss, "softmax|garbage|entropic|objectosphere|maxentropy");
  t->add_option("--margin", tr.margin, "Soft-margin m (default 0.40)");
  t->add_option("--xi", tr.xi, "Objectosphere target magnitude (default 1)");
  t->add_option("--lambda", tr.lambda, "Objectosphere penalty weight (default 0.01)");
  t->add_option("--epochs", tr.epochs, "Training epochs (default 500)");
  t->add_option("--batch-size", tr.batch_size, "Mini-batch size (default 64)");
  t->add_option("--lr", tr.lr, "Learning rate (default 0.01)");
  t->add_option("--momentum", tr.momentum, "Momentum (default 0.9)");
  t->add_option("--seed", tr.seed, "Seed for initialization and shuffling (default 0)");
  t->add_option("--h1", tr.h1, "First hidden layer width (default 512)");
  t->add_option("--h2", tr.h2, "Compact feature width (default 256)");
  t->add_option("--val-every", tr.val_every, "Validate every N epochs (default 1)");

  EnrollArgs en;
  auto* e = app.add_subcommand("enroll", "Build gallery templates");
  e->add_option("--model", en.model, "Trained model (OSAM)");
  e->add_option("--gallery", en.gallery, "Gallery embeddings")->required();
  e->add_option("--out", en.out, "Output template file (OSEF)")->required();
  e->add_flag("--baseline", en.baseline, "Use the input embeddings without the adapter");

  ScoreArgs sc;
  auto* c = app.add_subcommand("score", "Score probes against gallery templates");
  c->add_option("--model", sc.model, "Trained model (OSAM)");
  c->add_option("--templates", sc.templates, "Template file from enroll")->required();
  c->add_option("--probe", sc.probe, "Probe embeddings")->required();
  c->add_option("--out", sc.out, "Output score matrix CSV")->required();
  c->add_flag("--baseline", sc.baseline, "Use the input embeddings without the adapter");

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Open-set ROC and TPIR@FPIR table");
  v->add_option("--scores", ev.scores, "Score matrix CSV")->required();
  v->add_option("--out", ev.out, "Output directory for curve.csv and table.csv")->required();

  HistArgs hi;
  auto* h = app.add_subcommand("hist", "Compact-feature magnitude histogram");
  h->add_option("--model", hi.model, "Trained model (OSAM)");
  h->add_option("--data", hi.data, "Embeddings to measure")->required();
  h->add_option("--bins", hi.bins, "Number of bins (>= 2)")->default_val(20);
  h->add_option("--out", hi.out, "Output histogram CSV")->required();
  h->add_flag("--baseline", hi.baseline, "Measure the input embeddings");

  std::vector<std::string> argv_store = {"oswatch"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) return cmd_train(tr, *t, out);
    if (e->parsed()) return cmd_enroll(en, out);
    if (c->parsed()) return cmd_score(sc, out);
    if (v->parsed()) return cmd_eval(ev, out);
    if (h->parsed()) return cmd_hist(hi, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return ex.exit_code();
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace oswatch
