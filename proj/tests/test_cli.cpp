#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "veracity/cli.hpp"
#include "veracity/synthetic.hpp"

using namespace veracity;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "veracity");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("veracity_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    SyntheticConfig cfg;
    cfg.per_label = 20;
    std::ofstream(root_ / "dump.jsonl") << to_jsonl(synthetic_corpus(cfg));
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string path(const std::string& rel) const { return (root_ / rel).string(); }

  std::vector<std::string> train_args() const {
    return {"train", "--bundle", path("data/bundle.jsonl"), "--runs", path("runs"), "--epochs", "1",
            "--toy-d", "8", "--toy-layers", "1", "--max-len", "16"};
  }

  fs::path root_;
};

}  // namespace

TEST_F(CliTest, MissingInputIsUsageError) {
  const auto r = invoke({"build-data", "--out", path("data")});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_EQ(invoke({}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"build-data", "--input", path("dump.jsonl"), "--out", path("d"), "--regime", "ternary"}).code,
            cli::kExitUsage);
}

TEST_F(CliTest, FineStatsShowEqualCounts) {
  const auto r = invoke({"build-data", "--input", path("dump.jsonl"), "--out", path("data")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(path("data/bundle.jsonl")));
  EXPECT_TRUE(fs::exists(path("data/stats.txt")));
  EXPECT_NE(r.out.find("regime: fine (6 classes)"), std::string::npos) << r.out;
  for (const char* name : {"pants-fire", "false", "mostly-false", "half-true", "mostly-true", "true"}) {
    std::ostringstream row;
    row << std::left << std::setw(14) << name << std::right << std::setw(10) << 20 << std::setw(10) << 20;
    EXPECT_NE(r.out.find(row.str()), std::string::npos) << name << "\n" << r.out;
  }
}

TEST_F(CliTest, BinaryStatsReportNeutralDrop) {
  const auto r = invoke({"build-data", "--input", path("dump.jsonl"), "--out", path("data"), "--regime", "binary"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("neutral-band dropped: 40"), std::string::npos) << r.out;
}

TEST_F(CliTest, MalformedRecordFailsBuild) {
  std::ofstream(root_ / "bad.jsonl") << "{\"id\":\"a\",\"statement\":\"x\",\"rating\":\"true\"}\nnot json\n";
  const auto r = invoke({"build-data", "--input", path("bad.jsonl"), "--out", path("data")});
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, TrainOneSeedThenRefuseRerun) {
  ASSERT_EQ(invoke({"build-data", "--input", path("dump.jsonl"), "--out", path("data")}).code, 0);
  auto args = train_args();
  args.insert(args.end(), {"--seeds", "0"});
  auto r = invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t runs = 0;
  for (const auto& e : fs::directory_iterator(path("runs/fine/cls"))) runs += e.is_directory();
  EXPECT_EQ(runs, 1u);
  EXPECT_TRUE(fs::exists(path("runs/fine/cls/0/checkpoint.bin")));

  r = invoke(args);
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("--force"), std::string::npos);
  args.push_back("--force");
  EXPECT_EQ(invoke(args).code, 0);
}

TEST_F(CliTest, ReportAndAnalyze) {
  ASSERT_EQ(invoke({"build-data", "--input", path("dump.jsonl"), "--out", path("data")}).code, 0);
  auto args = train_args();
  args.insert(args.end(), {"--seeds", "0,1", "--jobs", "2"});
  ASSERT_EQ(invoke(args).code, 0);

  auto r = invoke({"report", "--runs", path("runs"), "--out", path("report")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream metrics(path("report/metrics.csv"));
  const auto records = read_metrics_csv(metrics);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].seed, 0);
  EXPECT_NE(r.out.find("fine"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("report/aggregate.csv")));

  r = invoke({"analyze", "--runs", path("runs"), "--seeds", "0,1", "--out", path("figs")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("total violations"), std::string::npos);
  std::ifstream dist(path("figs/distribution_fine_cls.csv"));
  EXPECT_EQ(read_distribution_csv(dist).rows(), 6);
  EXPECT_TRUE(fs::exists(path("figs/distribution_fine_cls.svg")));

  r = invoke({"analyze", "--runs", path("runs"), "--seeds", "0,1,2", "--out", path("figs")});
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("seed 2"), std::string::npos) << r.err;
}

TEST_F(CliTest, ReportOnEmptyDirectoryFails) {
  fs::create_directories(path("empty"));
  EXPECT_EQ(invoke({"report", "--runs", path("empty")}).code, cli::kExitFailure);
}

TEST_F(CliTest, ConfigFileSuppliesFlags) {
  std::ofstream(root_ / "cfg.toml") << "[build-data]\ninput = \"" << path("dump.jsonl") << "\"\nout = \""
                                    << path("data") << "\"\nregime = \"coarse\"\n";
  const auto r = invoke({"--config", path("cfg.toml"), "build-data"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("regime: coarse"), std::string::npos);
}
