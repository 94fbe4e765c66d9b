#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "alforge/csv.hpp"
#include "alforge/datagen.hpp"
#include "alforge/experiment.hpp"

namespace alforge {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "alforge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("alforge_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::vector<std::string> tiny_run(const std::string& out) const {
    return {"run", "--n-train", "300", "--n-test", "100", "--dim", "4", "--steps", "2", "--query", "10",
            "--seed-per-class", "3", "--epochs", "2", "--fc", "6", "--strategy", "random,mc-mi",
            "--repetitions", "1", "--mc-passes", "2", "--out", out};
  }

  fs::path dir_;
};

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"gen-data"}).code, 2);  // no --out
  EXPECT_EQ(cli({"gen-data", "--out", path("g"), "--preset", "nope"}).code, 2);
  EXPECT_EQ(cli({"run", "--strategy", "bald", "--out", path("r")}).code, 2);
  EXPECT_EQ(cli({"run", "--steps", "many", "--out", path("r")}).code, 2);
  EXPECT_EQ(cli({"report"}).code, 2);
  EXPECT_EQ(cli({"plot-data", "--in", path("missing"), "--out", path("p")}).code, 1);
  EXPECT_EQ(cli({"run", "--data", path("missing"), "--out", path("r")}).code, 1);
}

TEST_F(CliTest, GenDataPrintsCountsAndWritesContainers) {
  const Result r = cli({"gen-data", "--n-train", "1000", "--n-test", "200", "--out", path("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Small Vehicle: 780"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Tram: 13"), std::string::npos);
  const Dataset train = dataset_read(path("g/train"));
  EXPECT_EQ(train.size(), 1000u);
  EXPECT_EQ(dataset_read(path("g/test")).size(), 200u);
}

TEST_F(CliTest, RunWritesArtifactsAndReplaysFromEcho) {
  const Result r = cli(tiny_run(path("a")));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"config.echo", "run.log", "reference_0.csv", "pool_0.csv", "metrics_random_0.csv",
                        "metrics_mc-mi_0.csv", "querylog_mc-mi_0.txt", "calib_mc-mi_0.csv", "errcurve_random_0.csv"}) {
    EXPECT_TRUE(fs::exists(path(std::string("a/") + f))) << f;
  }
  const auto recs = read_metrics_csv(path("a/metrics_mc-mi_0.csv"));
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[2].labeled_count, recs[0].labeled_count + 20);
  std::size_t queried = 0;
  for (auto q : recs[1].queried_per_class) queried += q;
  EXPECT_EQ(queried, 10u);

  const Result again = cli({"run", "--config", path("a/config.echo"), "--out", path("b")});
  ASSERT_EQ(again.code, 0) << again.err;
  for (const auto& entry : fs::directory_iterator(path("a"))) {
    const fs::path other = dir_ / "b" / entry.path().filename();
    if (entry.path().filename() == "config.echo") continue;  // differs in out only
    EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path().filename();
  }
}

TEST_F(CliTest, PlotDataWritesCurveFiles) {
  ASSERT_EQ(cli(tiny_run(path("a"))).code, 0);
  const Result r = cli({"plot-data", "--in", path("a"), "--out", path("p")});
  ASSERT_EQ(r.code, 0) << r.err;
  const CsvTable curve = read_csv(path("p/learning_curve.csv"));
  EXPECT_EQ(curve.rows.size(), 6u);  // 2 strategies x 3 steps
  EXPECT_TRUE(curve.has_column("labeled_count"));
  const CsvTable delta = read_csv(path("p/classdelta.csv"));
  EXPECT_FALSE(delta.rows.empty());
  const CsvTable calib = read_csv(path("p/calibration_step1.csv"));
  std::size_t total = 0;
  for (std::size_t i = 0; i < calib.rows.size(); ++i) {
    if (calib.text(i, "strategy") == "mc-mi") total += static_cast<std::size_t>(calib.number(i, "count"));
  }
  EXPECT_EQ(total, 100u);
  EXPECT_TRUE(fs::exists(path("p/errorcurve_step2.csv")));
}

// Hand-built run directory: the crossing is the first listed point at or
// below the threshold.
TEST_F(CliTest, ReportOnConstructedCurves) {
  const fs::path run = dir_ / "run";
  fs::create_directories(run);
  std::ofstream(run / "config.echo") << "seed = 1\nstrategies = random,ens-mi\nout = x\n";
  CsvWriter ref({"dataset_hash", "config_hash", "seed", "accuracy", "loc_mse"});
  ref.cell("0").cell("0").cell(std::size_t{1}).cell(0.9).cell(0.01);
  ref.end_row();
  ref.save((run / "reference_0.csv").string());
  auto curve = [](double acc0, double acc_step, double mse0, double mse_step) {
    std::vector<MetricsRecord> recs;
    for (std::size_t s = 0; s <= 8; ++s) {
      MetricsRecord m;
      m.step = s;
      m.labeled_count = 100 + 100 * s;
      m.accuracy = acc0 + acc_step * s;
      m.loc_mse = mse0 + mse_step * s;
      m.queried_per_class = {0, 0};
      recs.push_back(m);
    }
    return recs;
  };
  // random: error 0.1 - 0.0125 s hits 0.05 at s = 4 (500 labels).
  write_metrics_csv((run / "metrics_random_0.csv").string(), curve(0.8, 0.0125, 0.02, -0.0005), 2);
  // ens-mi: error 0.1 - 0.025 s hits 0.05 at s = 2 (300 labels); mse (0.01 - 0.001 s) / 0.01 <= 0.3 at s = 7.
  write_metrics_csv((run / "metrics_ens-mi_0.csv").string(), curve(0.8, 0.025, 0.02, -0.001), 2);

  const Result r = cli({"report", "--in", run.string(), "--class-thresholds", "0.05,0.001", "--loc-thresholds", "0.3",
                        "--out", path("report.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("unreached"), std::string::npos);
  const CsvTable t = read_csv(path("report.csv"));
  bool found = false;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.text(i, "strategy") != "ens-mi") continue;
    const double thr = t.number(i, "threshold");
    if (t.text(i, "kind") == "classification" && thr == 0.05) {
      found = true;
      EXPECT_EQ(t.text(i, "baseline_labels"), "500");
      EXPECT_EQ(t.text(i, "method_labels"), "300");
      EXPECT_NEAR(t.number(i, "savings"), 0.4, 1e-12);
    }
    if (t.text(i, "kind") == "localization") {
      EXPECT_EQ(t.text(i, "method_labels"), "800");
      EXPECT_EQ(t.text(i, "baseline_labels"), "unreached");
      EXPECT_EQ(t.text(i, "savings"), "unreached");
    }
  }
  EXPECT_TRUE(found);

  // Directories with different configs are refused.
  const fs::path other = dir_ / "other";
  fs::create_directories(other);
  std::ofstream(other / "config.echo") << "seed = 2\n";
  EXPECT_EQ(cli({"report", "--in", run.string(), other.string()}).code, 2);
}

}  // namespace
}  // namespace alforge
