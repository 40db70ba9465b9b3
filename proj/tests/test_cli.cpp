#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("ejko_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int run(const std::string& args) {
    const std::string cmd = std::string(EJKO_BINARY) + " " + args + " > " + (dir_ / "stdout.txt").string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::size_t lines(const fs::path& p) {
    const std::string s = read(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
  }

  std::string stdout_text() { return read(dir_ / "stdout.txt"); }
  std::string stderr_text() { return read(dir_ / "stderr.txt"); }

  fs::path dir_;
};

const char* kHeat = R"(problem = heat
grid.lower = -3
grid.upper = 3
grid.counts = 40
h = 0.05
epsilon = 0.05
T = 0.2
)";

const char* kKramers = R"(problem = kramers
grid.lower = -0.5, -2.4
grid.upper = 0.5, 2.4
grid.counts = 12, 10
h = 0.02
epsilon = 0.5
T = 0.06
log_domain = true
)";

}  // namespace

TEST_F(CliTest, SolveWritesAllOutputs) {
  const auto cfg = write("heat.conf", kHeat);
  const auto out = dir_ / "run";
  ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + out.string()), 0) << stderr_text();
  for (const char* f : {"config.resolved", "trace.csv", "error.csv", "state_0.csv", "state_2.csv", "state_4.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_EQ(lines(out / "trace.csv"), 6u);
  EXPECT_EQ(read(out / "trace.csv").substr(0, 80),
            std::string("step,time,free_energy,entropy,second_moment,transport_objective,inner_iters,residual\n")
                .substr(0, 80));
  EXPECT_EQ(lines(out / "error.csv"), 6u);
  EXPECT_EQ(lines(out / "state_4.csv"), 41u);
  EXPECT_NE(stdout_text().find("scaling ratio"), std::string::npos);
}

TEST_F(CliTest, RunsAreByteIdentical) {
  const auto cfg = write("k.conf", kKramers);
  ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + (dir_ / "a").string()), 0) << stderr_text();
  ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + (dir_ / "b").string()), 0) << stderr_text();
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(dir_ / "a")) {
    if (e.path().extension() != ".csv") continue;
    EXPECT_EQ(read(e.path()), read(dir_ / "b" / e.path().filename())) << e.path();
    ++compared;
  }
  EXPECT_GE(compared, 5u);
}

TEST_F(CliTest, FlagsOverrideConfig) {
  const auto cfg = write("k.conf", kKramers);
  const auto out = dir_ / "mf";
  ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + out.string() + " --matrix-free --threads 1"), 0)
      << stderr_text();
  const std::string resolved = read(out / "config.resolved");
  EXPECT_NE(resolved.find("kernel = matrix_free"), std::string::npos);
  EXPECT_NE(resolved.find("threads = 1"), std::string::npos);
  EXPECT_NE(resolved.find("output = " + out.string()), std::string::npos);
  EXPECT_EQ(lines(out / "error.csv"), 5u);
}

TEST_F(CliTest, UnwritableOutputLeavesNothingBehind) {
  const auto cfg = write("heat.conf", kHeat);
  const auto blocker = write("blocker", "not a directory");
  const auto out = blocker / "run";
  EXPECT_EQ(run("solve --config " + cfg.string() + " --out " + out.string()), 3);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(read(blocker), "not a directory");
  EXPECT_NE(stderr_text().find("error"), std::string::npos);
}

TEST_F(CliTest, ConfigErrorNamesKey) {
  std::string text = kHeat;
  text.replace(text.find("h = 0.05"), 8, "h = 0");
  const auto cfg = write("bad.conf", text);
  EXPECT_EQ(run("solve --config " + cfg.string() + " --out " + (dir_ / "x").string()), 1);
  EXPECT_NE(stderr_text().find("'h'"), std::string::npos) << stderr_text();
  EXPECT_FALSE(fs::exists(dir_ / "x"));
}

TEST_F(CliTest, SolverFailureIsReportedWithStep) {
  const auto cfg = write("fail.conf", std::string(kHeat) + "max_iter = 1\n");
  EXPECT_EQ(run("solve --config " + cfg.string() + " --out " + (dir_ / "f").string()), 2);
  EXPECT_NE(stdout_text().find("step 1 failed"), std::string::npos) << stdout_text();
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("solve"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  const auto cfg = write("heat.conf", kHeat);
  EXPECT_EQ(run("solve --config " + cfg.string() + " --dense --matrix-free"), 1);
}

TEST_F(CliTest, ExactAndErrorCommands) {
  const auto cfg = write("k.conf", kKramers);
  const auto out = dir_ / "run";
  ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + out.string()), 0) << stderr_text();
  const auto exact = dir_ / "exact.csv";
  ASSERT_EQ(run("exact --config " + cfg.string() + " --time 0.06 --out " + exact.string()), 0) << stderr_text();
  EXPECT_EQ(lines(exact), 121u);
  EXPECT_EQ(read(exact).substr(0, 29), "index,coord_1,coord_2,weight\n");
  const auto table = dir_ / "errors.csv";
  ASSERT_EQ(run("error --config " + cfg.string() + " --run " + out.string() + " --out " + table.string()), 0)
      << stderr_text();
  EXPECT_EQ(read(table), read(out / "error.csv"));
}

TEST_F(CliTest, OtSolveAndCostDump) {
  const auto cfg = write("k.conf", kKramers);
  const auto out = dir_ / "run";
  ASSERT_EQ(run("solve --config " + cfg.string() + " --out " + out.string()), 0) << stderr_text();
  const auto plan = dir_ / "plan.csv";
  ASSERT_EQ(run("ot solve --config " + cfg.string() + " --mu " + (out / "state_0.csv").string() + " --nu " +
                (out / "state_1.csv").string() + " --plan " + plan.string()),
            0)
      << stderr_text();
  const std::string summary = stdout_text();
  EXPECT_NE(summary.find("converged = true"), std::string::npos) << summary;
  EXPECT_NE(summary.find("row_residual = "), std::string::npos);
  EXPECT_EQ(lines(plan), 120u * 120u + 1u);

  const auto cost = dir_ / "cost.csv";
  ASSERT_EQ(run("cost dump --config " + cfg.string() + " --out " + cost.string()), 0) << stderr_text();
  EXPECT_EQ(lines(cost), 120u * 120u + 1u);
  EXPECT_EQ(read(cost).substr(0, 15), "row,col,value\n0");

  std::string big = kKramers;
  big.replace(big.find("12, 10"), 6, "50, 41");
  const auto big_cfg = write("big.conf", big);
  EXPECT_EQ(run("cost dump --config " + big_cfg.string() + " --out " + (dir_ / "big.csv").string()), 1);
}

TEST_F(CliTest, CheckPrintsTable) {
  EXPECT_EQ(run("check"), 0) << stdout_text();
  const std::string table = stdout_text();
  EXPECT_NE(table.find("PASS  [1]"), std::string::npos);
  EXPECT_NE(table.find("PASS  [9]"), std::string::npos);
  EXPECT_NE(table.find("7/7 checks passed"), std::string::npos);
}
