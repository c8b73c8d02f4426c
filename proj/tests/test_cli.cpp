// Runs the built command-line tool as a subprocess.
#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "support.hpp"

using namespace earlyshape;

namespace {

struct Run {
  int status = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(EARLYSHAPE_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int st = ::pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string data_flag() { return "--data " + es_test::data_dir().string(); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_lines(const std::filesystem::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// A quickly trained ItalyPowerDemand model shared by several tests.
class CliModel : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new es_test::TempDir("cli-model");
    const auto r = run("train " + data_flag() + " --dataset ItalyPowerDemand --epochs 3 --seed 4 --out " +
                       (dir_->path() / "run").string());
    ASSERT_EQ(r.status, 0) << r.output;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::filesystem::path model() { return dir_->path() / "run" / "model.json"; }
  static std::filesystem::path dir() { return dir_->path(); }

 private:
  static es_test::TempDir* dir_;
};

es_test::TempDir* CliModel::dir_ = nullptr;

}  // namespace

TEST_F(CliModel, TrainWritesModelReportAndLog) {
  EXPECT_TRUE(std::filesystem::exists(dir() / "run" / "report.json"));
  EXPECT_EQ(count_lines(dir() / "run" / "train.log"), 4u);  // three epochs and the stop line
  const auto report = nlohmann::json::parse(slurp(dir() / "run" / "report.json"));
  EXPECT_EQ(report["dataset"], "ItalyPowerDemand");
  EXPECT_EQ(report["train_config"]["seed"], 4);
  EXPECT_NO_THROW(load_model(model()));
}

TEST_F(CliModel, ThresholdModeOneRowPerThreshold) {
  const auto out = dir() / "thr";
  const auto r = run("eval " + data_flag() + " --dataset ItalyPowerDemand --model " + model().string() +
                     " --mode threshold --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(count_lines(out / "curve.csv"), 13u);  // header + 12 thresholds
}

TEST_F(CliModel, PerTimestampCheckpoints) {
  const auto out = dir() / "pts";
  const auto r = run("eval " + data_flag() + " --dataset ItalyPowerDemand --model " + model().string() +
                     " --mode threshold --per-timestamp --thresholds 0.5,0.9 --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  const auto j = nlohmann::json::parse(slurp(out / "curve.json"));
  EXPECT_EQ(j["settings"]["checkpoints"].size(), 24u);
  EXPECT_EQ(count_lines(out / "curve.csv"), 3u);
}

TEST_F(CliModel, SingleFractionGivesSingleRow) {
  const auto out = dir() / "one";
  const auto r = run("eval " + data_flag() + " --dataset ItalyPowerDemand --model " + model().string() +
                     " --fractions 1.0 --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_EQ(count_lines(out / "curve.csv"), 2u);
  EXPECT_NE(r.output.find("over 1 points"), std::string::npos) << r.output;
}

TEST_F(CliModel, EvalMatchesLibrary) {
  const auto out = dir() / "lib";
  const auto r = run("eval " + data_flag() + " --dataset ItalyPowerDemand --model " + model().string() +
                     " --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  const auto m = load_model(model());
  const auto test = es_test::ucr("ItalyPowerDemand", "TEST");
  std::ostringstream expected;
  write_curve_csv(eval_fixed_fractions(m.params, m.config, test, even_fractions(10)), expected);
  EXPECT_EQ(slurp(out / "curve.csv"), expected.str());
}

TEST_F(CliModel, ExportFiltersWritesNineFiles) {
  const auto out = dir() / "filters";
  const auto r = run("export filters --model " + model().string() + " --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(out)) n += e.path().extension() == ".csv";
  EXPECT_EQ(n, 9u);
}

TEST_F(CliModel, ExportTraceWritesFeatures) {
  const auto out = dir() / "trace";
  const auto r = run("export trace --model " + model().string() + " " + data_flag() +
                     " --dataset ItalyPowerDemand --index 3 --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_TRUE(std::filesystem::exists(out / "features.csv"));
}

TEST_F(CliModel, VersionMismatchExitsOne) {
  auto j = nlohmann::json::parse(slurp(model()));
  j["format_version"] = 2;
  const auto bad = dir() / "bad.json";
  std::ofstream(bad) << j.dump();
  const auto r = run("eval " + data_flag() + " --dataset ItalyPowerDemand --model " + bad.string() + " --out " +
                     (dir() / "never").string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("format_version 2"), std::string::npos) << r.output;
  EXPECT_FALSE(std::filesystem::exists(dir() / "never"));
}

TEST_F(CliModel, ShapeMismatchAgainstOtherDataset) {
  const auto r = run("eval " + data_flag() + " --dataset GunPoint --model " + model().string() + " --out " +
                     (dir() / "gp").string());
  EXPECT_EQ(r.status, 1) << r.output;
}

TEST(Cli, MissingDatasetExitsTwoWithoutOutputs) {
  es_test::TempDir dir("cli-missing");
  const auto r = run("train " + data_flag() + " --dataset NoSuchSet --out " + (dir.path() / "out").string());
  EXPECT_EQ(r.status, 2);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "out"));
}

TEST(Cli, OutOfRangeRhoNamesTheFlag) {
  es_test::TempDir dir("cli-rho");
  const auto r = run("train " + data_flag() + " --dataset ItalyPowerDemand --rho 1.5 --out " +
                     (dir.path() / "out").string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("--rho"), std::string::npos) << r.output;
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "out"));
}

TEST(Cli, UnknownConfigKeyRejected) {
  es_test::TempDir dir("cli-cfg");
  std::ofstream(dir.path() / "c.json") << R"({"learning_rate": 0.1})";
  const auto r = run("train " + data_flag() + " --dataset ItalyPowerDemand --config " +
                     (dir.path() / "c.json").string() + " --out " + (dir.path() / "out").string());
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.output.find("learning_rate"), std::string::npos) << r.output;
}

TEST(Cli, KnnBaselineAcceptsLegacyName) {
  es_test::TempDir dir("cli-knn");
  const auto r = run("baseline knn " + data_flag() + " --dataset \"Gun Point\" --out " + dir.path().string());
  ASSERT_EQ(r.status, 0) << r.output;
  EXPECT_NE(r.output.find("1NN error 0.087"), std::string::npos) << r.output;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "knn.json"));
}

TEST(Cli, CvIsDeterministic) {
  es_test::TempDir dir("cli-cv");
  const std::string args = "cv " + data_flag() + " --dataset ItalyPowerDemand --budget 2 --folds 2 --epochs 2 --out ";
  const auto a = run(args + (dir.path() / "a").string());
  const auto b = run(args + (dir.path() / "b").string());
  ASSERT_EQ(a.status, 0) << a.output;
  EXPECT_EQ(a.output, b.output);
  EXPECT_EQ(slurp(dir.path() / "a" / "cv.json"), slurp(dir.path() / "b" / "cv.json"));
}

TEST(Cli, PlotMissingCurveExitsTwo) {
  es_test::TempDir dir("cli-plot");
  const auto r = run("plot " + (dir.path() / "absent.csv").string() + " --out " + (dir.path() / "p.gp").string());
  EXPECT_EQ(r.status, 2) << r.output;
}

TEST(Cli, BadUsageExitsOne) {
  EXPECT_EQ(run("train --bogus").status, 1);
  EXPECT_EQ(run("--help").status, 0);
}
