#include "nbrenc/cli/commands.hpp"
#include "nbrenc/cli/config.hpp"
#include "nbrenc/data/loaders.hpp"
#include "nbrenc/training/checkpoint.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <sstream>

using namespace nbrenc;
using namespace nbrenc::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = NBRENC_CLI_PATH;

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Three well separated blobs written as labeled train/test CSV files.
class CliFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto train = fixture::gaussian_blobs(40, 6, 3, 6.0, 1);
    const auto test = fixture::gaussian_blobs(20, 6, 3, 6.0, 1);
    DenseMatrix squash_train = (1.0f / (1.0f + (-train.points.array() * 0.3f).exp())).matrix();
    DenseMatrix squash_test = (1.0f / (1.0f + (-test.points.array() * 0.3f).exp())).matrix();
    fixture::write_text(dir_ / "train.csv", fixture::labeled_csv(squash_train, train.labels));
    fixture::write_text(dir_ / "test.csv", fixture::labeled_csv(squash_test, test.labels));
    fixture::write_text(dir_ / "train_raw.csv", fixture::labeled_csv(train.points, train.labels));
    fixture::write_text(dir_ / "test_raw.csv", fixture::labeled_csv(test.points, test.labels));
  }

  json base_config(const std::string& out) const {
    return json{{"data", {{"format", "csv"},
                          {"train", {{"features", (dir_ / "train.csv").string()}}},
                          {"test", {{"features", (dir_ / "test.csv").string()}}}}},
                {"model", {{"encoder_widths", {8, 3}}, {"variant", "denoising"}}},
                {"train", {{"epochs", 3}, {"batch_size", 16}, {"seed", 5}}},
                {"eval", {{"clusters", 3}, {"sizes", {10, 100}}, {"seeds", {1, 2, 3}}, {"restarts", 2}}},
                {"output", {{"dir", (dir_ / out).string()}}}};
  }

  fs::path write_config(const json& j, const std::string& name) const {
    const fs::path p = dir_ / name;
    fixture::write_text(p, j.dump(2));
    return p;
  }

  fixture::ProcessResult cli(std::vector<std::string> args) const { return fixture::run_process(kCli, args); }

  fixture::TempDir dir_;
};

}  // namespace

TEST_F(CliFixture, MinimalConfigFillsDefaults) {
  const json j = {{"data", {{"format", "csv"}, {"train", {{"features", (dir_ / "train.csv").string()}}}}}};
  const RunConfig c = parse_config(j);
  EXPECT_DOUBLE_EQ(c.model.corruption_rate, 0.2);
  EXPECT_DOUBLE_EQ(c.train.adam.lr, 1e-3);
  EXPECT_EQ(c.eval.kmeans.restarts, 10u);
  EXPECT_EQ(c.model.encoder_widths, (std::vector<std::size_t>{256, 64}));
  EXPECT_EQ(c.neighbor.function, NeighborKind::simple);
  EXPECT_EQ(c.neighbor.refresh_period, 0u);
  const json resolved = resolved_json(c);
  EXPECT_EQ(parse_config(resolved).model, c.model);
}

TEST_F(CliFixture, FeatureNeighborsRefreshEveryEpochByDefault) {
  json j = base_config("o");
  j["neighbor"] = {{"function", "feature"}};
  EXPECT_EQ(parse_config(j).train.refresh_period, 1u);
}

TEST_F(CliFixture, EveryProblemReportedAtOnce) {
  json j = base_config("o");
  j["model"]["varaint"] = "denoising";
  j["neighbor"] = {{"proximity", 0}};
  j["data"]["test"]["features"] = (dir_ / "missing.csv").string();
  j["train"]["lr"] = -1;
  try {
    parse_config(j);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    std::string all;
    for (const auto& p : e.problems()) all += p + "\n";
    EXPECT_GE(e.problems().size(), 4u) << all;
    EXPECT_NE(all.find("varaint"), std::string::npos) << all;
    EXPECT_NE(all.find("proximity"), std::string::npos) << all;
    EXPECT_NE(all.find("missing.csv"), std::string::npos) << all;
    EXPECT_NE(all.find("learning rate"), std::string::npos) << all;
  }
}

TEST_F(CliFixture, BadEnumsAndSlotMismatch) {
  json j = base_config("o");
  j["model"]["variant"] = "sparse";
  EXPECT_THROW(parse_config(j), ValidationError);
  j = base_config("o");
  j["neighbor"] = {{"function", "knn"}, {"k", 3}};
  EXPECT_THROW(parse_config(j), ValidationError);
  j["model"]["decoder_count"] = 3;
  EXPECT_NO_THROW(parse_config(j));
  j["unknown_section"] = 1;
  EXPECT_THROW(parse_config(j), ValidationError);
}

TEST(Override, DottedPathsAndValueTypes) {
  json doc = {{"train", {{"epochs", 3}}}};
  apply_override(doc, "train.epochs=7");
  apply_override(doc, "model.variant=variational");
  apply_override(doc, "eval.sizes=[1,2]");
  EXPECT_EQ(doc["train"]["epochs"], 7);
  EXPECT_EQ(doc["model"]["variant"], "variational");
  EXPECT_EQ(doc["eval"]["sizes"], json({1, 2}));
  EXPECT_THROW(apply_override(doc, "novalue"), ConfigError);
}

TEST_F(CliFixture, TrainEncodeEvaluateEndToEndAndDeterministic) {
  const fs::path cfg = write_config(base_config("run"), "c.json");
  for (const std::string out : {"run", "again"}) {
    const auto a = cli({"train", "--config", cfg.string(), "--out", (dir_ / out).string()});
    ASSERT_EQ(a.exit_code, 0) << a.output;
    EXPECT_NE(a.output.find("resolved config"), std::string::npos);
    const auto b = cli({"encode", "--config", cfg.string(), "--out", (dir_ / out).string()});
    ASSERT_EQ(b.exit_code, 0) << b.output;
    const auto c = cli({"evaluate", "--config", cfg.string(), "--out", (dir_ / out).string()});
    ASSERT_EQ(c.exit_code, 0) << c.output;
  }
  const auto model = training::load_checkpoint(dir_ / "run" / "model.nbrc");
  EXPECT_EQ(model.config.input_width(), 6u);
  EXPECT_EQ(lines_of(fixture::read_text(dir_ / "run" / "history.csv")).size(), 4u);
  EXPECT_EQ(lines_of(fixture::read_text(dir_ / "run" / "train_repr.csv")).size(), 120u);
  EXPECT_EQ(lines_of(fixture::read_text(dir_ / "run" / "test_repr.csv")).size(), 60u);
  for (const char* f : {"model.nbrc", "history.csv", "train_repr.csv", "test_repr.csv", "metrics.csv"}) {
    EXPECT_EQ(fixture::read_text(dir_ / "run" / f), fixture::read_text(dir_ / "again" / f)) << f;
  }
  const auto metrics = lines_of(fixture::read_text(dir_ / "run" / "metrics.csv"));
  EXPECT_EQ(metrics.front(), "experiment,seed,size,metric,value");
  // 3 seeds x 3 clustering metrics + 2 sizes x 3 seeds.
  EXPECT_EQ(metrics.size(), 1u + 9u + 6u);
}

TEST_F(CliFixture, EncodeTwiceIsIdenticalAndVariationalGivesMeanOnly) {
  json j = base_config("var");
  j["model"]["variant"] = "variational";
  const fs::path cfg = write_config(j, "v.json");
  ASSERT_EQ(cli({"train", "--config", cfg.string()}).exit_code, 0);
  ASSERT_EQ(cli({"encode", "--config", cfg.string()}).exit_code, 0);
  const std::string first = fixture::read_text(dir_ / "var" / "train_repr.csv");
  ASSERT_EQ(cli({"encode", "--config", cfg.string()}).exit_code, 0);
  EXPECT_EQ(first, fixture::read_text(dir_ / "var" / "train_repr.csv"));
  const auto repr = read_matrix_csv(dir_ / "var" / "train_repr.csv");
  EXPECT_EQ(repr.cols(), 3);
  EXPECT_EQ(repr.rows(), 120);
}

TEST_F(CliFixture, ClusteringOnSeparatedEncodingsIsPerfect) {
  json j = base_config("eval");
  j["data"]["train"]["features"] = (dir_ / "train_raw.csv").string();
  j["data"]["test"]["features"] = (dir_ / "test_raw.csv").string();
  j["eval"]["tasks"] = {"clustering"};
  const fs::path cfg = write_config(j, "e.json");
  const auto r = cli({"evaluate", "--config", cfg.string(), "--train-repr", (dir_ / "train_raw.csv").string(),
                      "--test-repr", (dir_ / "test_raw.csv").string()});
  // The label column rides along as one more feature; it only separates the
  // blobs further.
  ASSERT_EQ(r.exit_code, 0) << r.output;
  for (const auto& line : lines_of(fixture::read_text(dir_ / "eval" / "metrics.csv"))) {
    if (line.find(",ARI,") != std::string::npos) {
      EXPECT_NE(line.find("1.000000"), std::string::npos) << line;
    }
  }
}

TEST_F(CliFixture, NeighborsFiles) {
  DenseMatrix three(3, 2);
  three << 0, 0, 1, 0, 5, 5;
  fixture::write_text(dir_ / "three.csv", fixture::labeled_csv(three, {0, 0, 1}));
  json j = base_config("nb");
  j["data"] = {{"format", "csv"}, {"train", {{"features", (dir_ / "three.csv").string()}}}};
  ASSERT_EQ(cli({"neighbors", "--config", write_config(j, "n1.json").string()}).exit_code, 0);
  auto rows = lines_of(fixture::read_text(dir_ / "nb" / "neighbors.csv"));
  EXPECT_EQ(rows.front(), "sample,slot,neighbor,distance");
  EXPECT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1], "0,0,1,1");

  DenseMatrix four = DenseMatrix::Zero(4, 2);
  fixture::write_text(dir_ / "four.csv", fixture::labeled_csv(four, {0, 0, 1, 1}));
  j["data"]["train"]["features"] = (dir_ / "four.csv").string();
  j["neighbor"] = {{"function", "temporal"}, {"window", 2}};
  j["model"]["decoder_count"] = 2;
  ASSERT_EQ(cli({"neighbors", "--config", write_config(j, "n2.json").string()}).exit_code, 0);
  rows = lines_of(fixture::read_text(dir_ / "nb" / "neighbors.csv"));
  EXPECT_EQ(rows.size(), 1u + 6u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    int s = 0, slot = 0, n = 0;
    double d = 0;
    ASSERT_EQ(std::sscanf(rows[i].c_str(), "%d,%d,%d,%lf", &s, &slot, &n, &d), 4);
    EXPECT_EQ(std::abs(n - s), 1);
    EXPECT_EQ(d, -1.0);
  }

  j["data"]["train"]["features"] = (dir_ / "train.csv").string();
  j["neighbor"] = {{"function", "subspace"}, {"subspaces", {{0, 1, 2}, {3, 4, 5}}}};
  ASSERT_EQ(cli({"neighbors", "--config", write_config(j, "n3.json").string()}).exit_code, 0);
  rows = lines_of(fixture::read_text(dir_ / "nb" / "neighbors.csv"));
  EXPECT_EQ(rows.size(), 1u + 2u * 120u);
  EXPECT_EQ(rows[1].substr(0, 4), "0,0,");
  EXPECT_EQ(rows[2].substr(0, 4), "0,1,");
}

TEST_F(CliFixture, ExitCodes) {
  json j = base_config("codes");
  // Validation.
  json bad = j;
  bad["model"]["varaint"] = "x";
  auto r = cli({"train", "--config", write_config(bad, "bad.json").string()});
  EXPECT_EQ(r.exit_code, kExitValidation);
  EXPECT_NE(r.output.find("varaint"), std::string::npos);
  EXPECT_EQ(cli({"train"}).exit_code, kExitValidation);
  EXPECT_EQ(cli({"train", "--config", (dir_ / "nope.json").string()}).exit_code, kExitValidation);
  EXPECT_EQ(cli({"train", "--config", write_config(j, "ok.json").string(), "--set", "train.epochs=0"}).exit_code,
            kExitValidation);

  // Data.
  fixture::write_text(dir_ / "ragged.csv", "1,2,0\n3,1\n");
  json ragged = j;
  ragged["data"]["train"]["features"] = (dir_ / "ragged.csv").string();
  r = cli({"train", "--config", write_config(ragged, "ragged.json").string()});
  EXPECT_EQ(r.exit_code, kExitData);
  EXPECT_NE(r.output.find("line 2"), std::string::npos) << r.output;

  // Checkpoint trained on 6 features, data with 2.
  ASSERT_EQ(cli({"train", "--config", write_config(j, "ok.json").string()}).exit_code, 0);
  DenseMatrix two = DenseMatrix::Zero(4, 2);
  fixture::write_text(dir_ / "two.csv", fixture::labeled_csv(two, {0, 1, 0, 1}));
  json narrow = j;
  narrow["data"]["train"]["features"] = (dir_ / "two.csv").string();
  narrow["data"].erase("test");
  r = cli({"encode", "--config", write_config(narrow, "narrow.json").string(), "--checkpoint",
           (dir_ / "codes" / "model.nbrc").string()});
  EXPECT_EQ(r.exit_code, kExitData) << r.output;

  fixture::write_text(dir_ / "codes" / "model.nbrc", "garbage");
  r = cli({"encode", "--config", write_config(j, "ok.json").string()});
  EXPECT_EQ(r.exit_code, kExitData) << r.output;
}

TEST_F(CliFixture, DivergentTrainingExitsNumericAndKeepsLastGoodModel) {
  json j = base_config("nan");
  j["data"]["train"]["features"] = (dir_ / "train_raw.csv").string();
  j["data"].erase("test");
  j["model"]["loss"] = "mse";
  j["model"]["encoder_widths"] = {64, 64, 3};
  j["train"]["lr"] = 1e3;
  j["train"]["epochs"] = 50;
  const auto r = cli({"train", "--config", write_config(j, "nan.json").string()});
  EXPECT_EQ(r.exit_code, kExitNumeric) << r.output;
  ASSERT_TRUE(fs::exists(dir_ / "nan" / "model.nbrc"));
  const auto model = training::load_checkpoint(dir_ / "nan" / "model.nbrc");
  for (const auto& [name, p] : model.all_parameters()) EXPECT_TRUE(p->allFinite()) << name;
  EXPECT_TRUE(fs::exists(dir_ / "nan" / "history.csv"));
}

TEST_F(CliFixture, VersionFlag) {
  const auto r = cli({"--version"});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.output.find(kVersion), std::string::npos);
}

TEST(ExitCodeMapping, Classes) {
  EXPECT_EQ(exit_code_for(ValidationError({"x"})), kExitValidation);
  EXPECT_EQ(exit_code_for(ConfigError("x")), kExitValidation);
  EXPECT_EQ(exit_code_for(FormatError("x")), kExitData);
  EXPECT_EQ(exit_code_for(IoError("x")), kExitData);
  EXPECT_EQ(exit_code_for(InputError("x")), kExitData);
  EXPECT_EQ(exit_code_for(DimensionError("x")), kExitData);
  EXPECT_EQ(exit_code_for(ContractError("x")), kExitData);
  EXPECT_EQ(exit_code_for(TrainingError("x")), kExitNumeric);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), kExitOther);
}
