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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "oswatch/error.hpp"
#include "oswatch/gallery.hpp"
#include "oswatch/net.hpp"

namespace oswatch {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("oswatch_cli_" + std::string(::testing::UnitTest::GetInstance()
                                             ->current_test_info()
                                             ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void synth_small() {
    const CliRun r = run({"synth", "--known", "3", "--per-class", "10", "--dim", "4",
                       "--negatives", "2", "--unknowns", "2", "--out", path("data")});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  fs::path dir_;
};

TEST_F(CliTest, SynthWritesThreeSplits) {
  synth_small();
  for (const char* f : {"train.osef", "val.osef", "probe.osef"}) {
    EXPECT_TRUE(fs::exists(dir_ / "data" / f)) << f;
  }
  const CliRun csv = run({"synth", "--known", "3", "--per-class", "10", "--dim", "4", "--format",
                       "csv", "--out", path("csv")});
  ASSERT_EQ(csv.code, 0);
  EXPECT_NE(csv.out.find("train.csv"), std::string::npos);
  EXPECT_EQ(read_embeddings(path("csv/train.csv"), FileFormat::kCsv).num_known, 3u);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"synth", "--known", "1", "--out", path("x")}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"synth"}).code, 2);
  EXPECT_EQ(run({"synth", "--format", "xml", "--out", path("x")}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  synth_small();
  const CliRun bad_loss = run({"train", "--train", path("data/train.osef"), "--out", path("m"),
                            "--loss", "hinge"});
  EXPECT_EQ(bad_loss.code, 2);
  EXPECT_NE(bad_loss.err.find("maxentropy"), std::string::npos);
  EXPECT_EQ(run({"train", "--out", path("m")}).code, 2);
}

TEST_F(CliTest, ConfigRejectsUnknownKeys) {
  std::ofstream(path("cfg.json")) << R"({"epochs": 1, "learning_rate": 0.1})";
  const CliRun r = run({"train", "--config", path("cfg.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos);
  EXPECT_NE(r.err.find("batch-size"), std::string::npos);
  EXPECT_THROW(ExperimentConfig::from_json("[1,2]"), UsageError);
  EXPECT_THROW(ExperimentConfig::from_json(R"({"epochs": "ten"})"), UsageError);
}

TEST_F(CliTest, DefaultHyperparameters) {
  const ExperimentConfig c = ExperimentConfig::from_json("{}");
  EXPECT_EQ(c.train.epochs, 500u);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.train.momentum, 0.9);
  EXPECT_EQ(c.train.h1, 512u);
  EXPECT_EQ(c.train.h2, 256u);
  EXPECT_EQ(c.train.loss.margin, 0.40);
  EXPECT_EQ(c.train.loss.xi, 1.0);
  EXPECT_EQ(c.train.loss.lambda, 0.01);
}

TEST_F(CliTest, SoftMaxOnNegativesOnlyIsUsageError) {
  const Dataset d = Dataset::from_records(2, {{ClassLabel::negative(), {1.0f, 0.0f}},
                                              {ClassLabel::negative(), {0.0f, 1.0f}}});
  write_embeddings(d, path("neg.osef"), FileFormat::kBinary);
  const CliRun r = run({"train", "--train", path("neg.osef"), "--out", path("m"), "--loss",
                     "softmax", "--epochs", "1"});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST_F(CliTest, FullPipelineIsReproducible) {
  synth_small();
  std::ofstream(path("cfg.json")) << "{\"train\": \"" << path("data/train.osef")
                                   << "\", \"val\": \"" << path("data/val.osef")
                                   << "\", \"loss\": \"objectosphere\", \"epochs\": 3, "
                                      "\"h1\": 16, \"h2\": 8}";
  for (const char* tag : {"a", "b"}) {
    const std::string out = path(tag);
    CliRun r = run({"train", "--config", path("cfg.json"), "--out", out, "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"enroll", "--model", out + "/model.osam", "--gallery", path("data/train.osef"),
             "--out", out + "/gallery.osef"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"score", "--model", out + "/model.osam", "--templates", out + "/gallery.osef",
             "--probe", path("data/probe.osef"), "--out", out + "/scores.csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"eval", "--scores", out + "/scores.csv", "--out", out + "/eval"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("TPIR@FPIR=0.01"), std::string::npos);
    r = run({"hist", "--model", out + "/model.osam", "--data", path("data/train.osef"),
             "--bins", "10", "--out", out + "/hist.csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("negative"), std::string::npos);
  }
  const Model m = load_model(path("a/model.osam"));
  EXPECT_EQ(m.params.hidden1(), 16u);
  EXPECT_EQ(m.loss.variant, LossVariant::kObjectosphere);
  for (const char* f : {"model.osam", "history.csv", "gallery.osef", "scores.csv",
                        "eval/curve.csv", "eval/table.csv", "hist.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  const std::string history = slurp(dir_ / "a/history.csv");
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 4);
}

TEST_F(CliTest, EvalHandCase) {
  std::ofstream(path("scores.csv")) << "true_label,s0,s1\n0,0.9,0.2\n1,0.3,0.8\n0,0.4,0.6\n"
                                       "-2,0.5,0.1\n-2,0.7,0.65\n";
  const CliRun r = run({"eval", "--scores", path("scores.csv"), "--out", path("eval")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("TPIR@FPIR=1: 0.666667"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("TPIR@FPIR=0.001: n/a"), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "eval/curve.csv").substr(0, 15), "theta,fpir,tpir");
  std::ofstream(path("only_known.csv")) << "true_label,s0,s1\n0,0.9,0.2\n";
  EXPECT_EQ(run({"eval", "--scores", path("only_known.csv"), "--out", path("e2")}).code, 4);
  EXPECT_EQ(run({"eval", "--scores", path("missing.csv"), "--out", path("e3")}).code, 5);
}

TEST_F(CliTest, BaselineScoresOwnTemplatesPerfectly) {
  const Dataset g = Dataset::from_records(3, {{ClassLabel::known(0), {1, 0, 0}},
                                              {ClassLabel::known(1), {0, 2, 0}}});
  write_embeddings(g, path("g.osef"), FileFormat::kBinary);
  ASSERT_EQ(run({"enroll", "--baseline", "--gallery", path("g.osef"), "--out",
                 path("t.osef")}).code,
            0);
  ASSERT_EQ(run({"score", "--baseline", "--templates", path("t.osef"), "--probe",
                 path("g.osef"), "--out", path("s.csv")}).code,
            0);
  const ScoreMatrix m = score_matrix_from_csv(slurp(dir_ / "s.csv"));
  EXPECT_EQ(m.rows[0].scores[0], 1.0);
  EXPECT_EQ(m.rows[1].scores[1], 1.0);
  EXPECT_EQ(m.rows[0].scores[1], 0.0);
}

TEST_F(CliTest, DimensionMismatchNamesBothDimensions) {
  synth_small();
  ASSERT_EQ(run({"train", "--train", path("data/train.osef"), "--out", path("m"), "--epochs",
                 "1", "--h1", "8", "--h2", "4"}).code,
            0);
  const Dataset wide = Dataset::from_records(5, {{ClassLabel::known(0), {1, 0, 0, 0, 0}},
                                                 {ClassLabel::known(1), {0, 1, 0, 0, 0}},
                                                 {ClassLabel::known(2), {0, 0, 1, 0, 0}}});
  write_embeddings(wide, path("wide.osef"), FileFormat::kBinary);
  const CliRun r = run({"enroll", "--model", path("m/model.osam"), "--gallery", path("wide.osef"),
                     "--out", path("t.osef")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("4-dimensional"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("5-dimensional"), std::string::npos) << r.err;
}

TEST_F(CliTest, NegativeProbesRejected) {
  synth_small();
  ASSERT_EQ(run({"enroll", "--baseline", "--gallery", path("data/val.osef"), "--out",
                 path("t.osef")}).code,
            0);
  const CliRun r = run({"score", "--baseline", "--templates", path("t.osef"), "--probe",
                     path("data/train.osef"), "--out", path("s.csv")});
  EXPECT_EQ(r.code, 3);
}

TEST_F(CliTest, ExecutableExitCodes) {
  const char* exe = std::getenv("OSWATCH_CLI");
  if (exe == nullptr) GTEST_SKIP() << "OSWATCH_CLI not set";
  const std::string base = std::string(exe);
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  EXPECT_EQ(status(base + " synth --known 1 --out " + path("x")), 2);
  EXPECT_EQ(status(base + " eval --scores " + path("nope.csv") + " --out " + path("e")), 5);
  EXPECT_EQ(status(base + " synth --known 2 --per-class 4 --dim 2 --out " + path("ok")), 0);
  EXPECT_EQ(status(base + " --help"), 0);
}

}  // namespace
}  // namespace oswatch
