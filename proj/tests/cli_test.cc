#include "truelift/cli.h"

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "json.hpp"
#include "test_util.h"
#include "truelift/dataset.h"
#include "truelift/loss.h"
#include "truelift/models.h"

namespace truelift {
namespace {

namespace fs = std::filesystem;
using ::testing::HasSubstr;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome RunCli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::Run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  CliTest() : dir_("cli") {}

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  std::string GenData(std::size_t rows = 10000, std::uint64_t seed = 1) {
    const std::string path = Path("data_" + std::to_string(rows) + "_" +
                                  std::to_string(seed) + ".csv");
    const Outcome r = RunCli({"gen", "--rows", std::to_string(rows),
                              "--treatment-frac", "0.7", "--seed",
                              std::to_string(seed), "-o", path});
    EXPECT_EQ(r.code, cli::kOk) << r.err;
    return path;
  }

  testing::TempDir dir_;
};

TEST_F(CliTest, GenWritesDataAndManifest) {
  const std::string path = GenData();
  const ABDataset data = LoadCsv(path);
  EXPECT_EQ(data.size(), 10000u);
  EXPECT_TRUE(data.has_true_lift());
  const auto manifest =
      nlohmann::json::parse(testing::ReadFile(path + ".manifest.json"));
  EXPECT_EQ(manifest["command"], "gen");
  EXPECT_EQ(manifest["version"], cli::kVersion);
  EXPECT_TRUE(manifest["options"].contains("seed"));
  EXPECT_TRUE(manifest["options"].contains("noise"));
}

TEST_F(CliTest, GenIsDeterministic) {
  const std::string a = Path("a.csv");
  const std::string b = Path("b.csv");
  EXPECT_EQ(RunCli({"gen", "--rows", "500", "--seed", "7", "-o", a}).code, 0);
  EXPECT_EQ(RunCli({"gen", "--rows", "500", "--seed", "7", "-o", b}).code, 0);
  EXPECT_EQ(testing::ReadFile(a), testing::ReadFile(b));
}

TEST_F(CliTest, GenRejectsZeroRows) {
  const Outcome r = RunCli({"gen", "--rows", "0", "-o", Path("x.csv")});
  EXPECT_EQ(r.code, cli::kValidationError);
  EXPECT_FALSE(r.err.empty());
  EXPECT_FALSE(fs::exists(Path("x.csv")));
}

TEST_F(CliTest, UnknownSubcommandAndFlags) {
  EXPECT_EQ(RunCli({"frobnicate"}).code, cli::kValidationError);
  EXPECT_EQ(RunCli({}).code, cli::kValidationError);
  EXPECT_EQ(RunCli({"gen", "--bogus", "-o", Path("x.csv")}).code,
            cli::kValidationError);
  EXPECT_EQ(RunCli({"--help"}).code, cli::kOk);
  const Outcome v = RunCli({"--version"});
  EXPECT_EQ(v.code, cli::kOk);
  EXPECT_THAT(v.out, HasSubstr(cli::kVersion));
}

TEST_F(CliTest, TrainReferenceRunAndPlotData) {
  const std::string data = GenData();
  const std::string run = Path("run");
  const Outcome r = RunCli({"train", "--data", data, "--model", "linear",
                            "--init", "1,1,0.1", "--lr", "0.1", "--steps",
                            "100", "--bins", "5", "--snapshots", "0,1,10,100",
                            "--out-dir", run});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const StoredModel model = LoadModel(run + "/params.json");
  const std::vector<double> c = LinearCoefficients(model.params);
  EXPECT_GE(c[2], 0.40);
  EXPECT_LE(c[2], 0.55);
  EXPECT_TRUE(fs::exists(run + "/trace.csv"));
  EXPECT_TRUE(fs::exists(run + "/manifest.json"));
  for (int step : {0, 1, 10, 100}) {
    const LossReport rep =
        ReadLossReportCsv(run + "/snapshots/step_" + std::to_string(step) + ".csv");
    EXPECT_EQ(rep.n_bins, 5);
  }

  const Outcome plot = RunCli({"plot-data", "--run-dir", run});
  ASSERT_EQ(plot.code, cli::kOk) << plot.err;
  for (int step : {0, 1, 10, 100}) {
    const std::string fig = run + "/plot/fig_step_" + std::to_string(step) + ".csv";
    ASSERT_TRUE(fs::exists(fig));
    const std::string text = testing::ReadFile(fig);
    EXPECT_EQ(text.substr(0, text.find('\n')), "bin,mean_pred,lift,size");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);
  }
  // Step 0: every bin's mean prediction sits far above its lift.
  std::istringstream step0(testing::ReadFile(run + "/plot/fig_step_0.csv"));
  std::string line;
  std::getline(step0, line);
  while (std::getline(step0, line)) {
    double bin, pred, lift, size;
    char comma;
    std::istringstream cells(line);
    cells >> bin >> comma >> pred >> comma >> lift >> comma >> size;
    EXPECT_GT(pred, lift + 0.5) << line;
  }

  const Outcome missing =
      RunCli({"plot-data", "--run-dir", run, "--steps", "5"});
  EXPECT_EQ(missing.code, cli::kValidationError);
  EXPECT_THAT(missing.err, HasSubstr("0,1,10,100"));
}

TEST_F(CliTest, TrainZeroStepsKeepsInit) {
  const std::string data = GenData(2000, 3);
  const std::string run = Path("run0");
  const Outcome r = RunCli({"train", "--data", data, "--init", "1,1,0.1",
                            "--steps", "0", "--out-dir", run});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(LinearCoefficients(LoadModel(run + "/params.json").params),
            (std::vector<double>{1.0, 1.0, 0.1}));
}

TEST_F(CliTest, TrainTooManyBins) {
  const std::string data = GenData(100, 2);
  const Outcome r = RunCli({"train", "--data", data, "--bins", "1000",
                            "--out-dir", Path("runbig")});
  EXPECT_EQ(r.code, cli::kRuntimeError);
  EXPECT_THAT(r.err, HasSubstr("EmptyArmInBin"));
}

TEST_F(CliTest, TrainMlp) {
  const std::string data = GenData(2000, 4);
  const std::string run = Path("mlp");
  const Outcome r = RunCli({"train", "--data", data, "--model", "mlp",
                            "--hidden", "3", "--activation", "relu", "--steps",
                            "5", "--out-dir", run});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const StoredModel m = LoadModel(run + "/params.json");
  EXPECT_EQ(m.spec, ModelSpec::Mlp(2, 3, Activation::kRelu));
  EXPECT_EQ(RunCli({"train", "--data", data, "--init", "1,2", "--out-dir",
                    Path("bad")})
                .code,
            cli::kValidationError);
}

TEST_F(CliTest, ConfigFileWithFlagPrecedence) {
  const std::string data = GenData(2000, 5);
  testing::WriteFile(dir_ / "train.ini", "lr = 0.05\nsteps = 3\nbins = 4\n");
  const std::string run = Path("cfg");
  const Outcome r = RunCli({"train", "--config", Path("train.ini"), "--data",
                            data, "--steps", "2", "--out-dir", run});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto manifest =
      nlohmann::json::parse(testing::ReadFile(run + "/manifest.json"));
  EXPECT_EQ(manifest["options"]["lr"], "0.05");
  EXPECT_EQ(manifest["options"]["steps"], "2");
  EXPECT_EQ(manifest["options"]["bins"], "4");
  const std::string trace = testing::ReadFile(run + "/trace.csv");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 4);

  EXPECT_EQ(RunCli({"train", "--config", Path("nope.ini"), "--data", data}).code,
            cli::kValidationError);
  testing::WriteFile(dir_ / "bad.ini", "steps = -4\n");
  EXPECT_EQ(RunCli({"train", "--config", Path("bad.ini"), "--data", data,
                    "--out-dir", Path("badcfg")})
                .code,
            cli::kValidationError);
}

TEST_F(CliTest, EvalRanksTrueAboveNull) {
  const std::string data = GenData(10000, 11);
  SaveModel(ModelSpec::Linear(2), LinearFromCoefficients(2, std::vector<double>{0, 0, 0.5}),
            dir_ / "true.json");
  SaveModel(ModelSpec::Linear(2), LinearFromCoefficients(2, std::vector<double>{0, 0, 0}),
            dir_ / "null.json");
  const Outcome t = RunCli({"eval", "--data", data, "--params", Path("true.json"),
                            "--bins", "5", "-o", Path("true_report.csv")});
  const Outcome n = RunCli({"eval", "--data", data, "--params", Path("null.json"),
                            "--bins", "5", "-o", Path("null_report.csv")});
  ASSERT_EQ(t.code, cli::kOk) << t.err;
  ASSERT_EQ(n.code, cli::kOk) << n.err;
  EXPECT_LT(ReadLossReportCsv(Path("true_report.csv")).loss,
            ReadLossReportCsv(Path("null_report.csv")).loss);
  EXPECT_TRUE(fs::exists(Path("true_report.csv") + ".manifest.json"));
}

TEST_F(CliTest, EvalSingleBin) {
  const std::string data_path = GenData(3000, 12);
  SaveModel(ModelSpec::Linear(2), LinearFromCoefficients(2, std::vector<double>{0.2, 0.1, 0.3}),
            dir_ / "m.json");
  const Outcome r = RunCli({"eval", "--data", data_path, "--params", Path("m.json"),
                            "--bins", "1", "-o", Path("one.csv")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const LossReport rep = ReadLossReportCsv(Path("one.csv"));
  ASSERT_EQ(rep.rows.size(), 1u);
  const double gap = rep.rows[0].stats.mean_pred - rep.global_lift;
  EXPECT_NEAR(rep.loss, gap * gap, 1e-12);

  SaveModel(ModelSpec::Linear(3), Params{{0, 0, 0, 0}}, dir_ / "wide.json");
  EXPECT_EQ(RunCli({"eval", "--data", data_path, "--params", Path("wide.json")}).code,
            cli::kValidationError);
}

TEST_F(CliTest, Gradcheck) {
  const Outcome ok = RunCli({"gradcheck"});
  EXPECT_EQ(ok.code, cli::kOk) << ok.out << ok.err;
  EXPECT_THAT(ok.out, HasSubstr("PASS"));
  const Outcome sabotaged = RunCli({"gradcheck", "--sabotage"});
  EXPECT_EQ(sabotaged.code, cli::kRuntimeError);
  EXPECT_THAT(sabotaged.out, HasSubstr("FAIL"));
  EXPECT_EQ(RunCli({"gradcheck", "--rows", "0"}).code, cli::kValidationError);

  const std::string data = GenData(300, 13);
  SaveModel(ModelSpec::Linear(2), LinearFromCoefficients(2, std::vector<double>{0.3, 0.1, 0.6}),
            dir_ / "g.json");
  EXPECT_EQ(RunCli({"gradcheck", "--data", data, "--params", Path("g.json")}).code,
            cli::kOk);
}

}  // namespace
}  // namespace truelift
