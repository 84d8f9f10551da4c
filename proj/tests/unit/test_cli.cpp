#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("moelab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CmdResult run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + MOE_LAB_EXE + "\" " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

const char* kMeasure =
    R"({"tau":1,"gate":{"kind":"linear"},"atoms":[{"beta0":0.3,"beta1":[1.5],"a":[-1],"b":1,"nu":0.2},)"
    R"({"beta0":0,"beta1":[0],"a":[1],"b":-1,"nu":0.3}]})";

}  // namespace

TEST_F(CliTest, MissingConfigExitsTwoAndNamesPath) {
  const CmdResult r = run("experiment --config /nonexistent/moelab.json --quiet");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/moelab.json"), std::string::npos) << r.err;
}

TEST_F(CliTest, BadArgumentsExitTwo) {
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("sample --n 10").code, 2);
  EXPECT_EQ(run("indep-check --order 3").code, 2);
}

TEST_F(CliTest, SampleThenFitConverges) {
  const fs::path m = write("truth.json", kMeasure);
  const fs::path data = dir_ / "data.csv";
  ASSERT_EQ(run("sample --measure " + m.string() + " --n 3000 --seed 4 --out " + data.string()).code, 0);
  EXPECT_EQ(slurp(data).substr(0, 6), "x_0,y\n");
  const fs::path cfg = write("fit.json", std::string(R"({"k":2,"seed":3,"init":{"kind":"near_truth","jitter_sd":0.05,"measure":)") +
                                             kMeasure + "}}");
  const fs::path out = dir_ / "fit_out.json";
  const CmdResult r = run("fit --data " + data.string() + " --config " + cfg.string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(j["converged"], true);
  EXPECT_EQ(j["schema"], 1);
  EXPECT_EQ(j["measure"]["atoms"].size(), 2u);

  const fs::path fitted = write("fitted.json", j["measure"].dump());
  const CmdResult l = run("losses --fitted " + fitted.string() + " --truth " + m.string() + " --kind D2 --kind 'D1(2)'");
  ASSERT_EQ(l.code, 0) << l.err;
  const auto lj = nlohmann::json::parse(l.out);
  EXPECT_NE(lj.dump().find("D1(2)"), std::string::npos);
}

TEST_F(CliTest, SampleIsDeterministic) {
  const fs::path m = write("truth.json", kMeasure);
  const CmdResult a = run("sample --measure " + m.string() + " --n 50 --seed 9");
  const CmdResult b = run("sample --measure " + m.string() + " --n 50 --seed 9");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, AnalysisCommands) {
  const fs::path m = write("truth.json", kMeasure);
  const CmdResult tv = run("tv --a " + m.string() + " --b " + m.string() + " --n-mc 8");
  ASSERT_EQ(tv.code, 0) << tv.err;
  EXPECT_EQ(tv.out.find("NaN"), std::string::npos);
  ASSERT_EQ(run("pde-check --measure " + m.string() + " --points 5").code, 0);
  ASSERT_EQ(run("rbar-search --m 2 --r 3 --budget 50").code, 0);
  const CmdResult ind = run("indep-check --activation sigmoid --order 1 --w 1");
  ASSERT_EQ(ind.code, 0) << ind.err;
  EXPECT_EQ(nlohmann::json::parse(ind.out).dump().find("\"independent\":true") != std::string::npos, true) << ind.out;
}

TEST_F(CliTest, ExperimentSmoke) {
  const fs::path cfg = write("exp.json", R"({"setting":"exact","n_grid":[100,200],"replications":2,"fit":{"max_em_iters":10},"seed":1})");
  const fs::path out = dir_ / "out";
  const CmdResult r = run("experiment --config " + cfg.string() + " --out-dir " + out.string() + " --quiet --workers 2");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"raw.csv", "summary.csv", "slopes.csv", "summary.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const std::string raw = slurp(out / "raw.csv");
  EXPECT_EQ(std::count(raw.begin(), raw.end(), '\n'), 1 + 2 * 2 * 2);
  EXPECT_NO_THROW((void)nlohmann::json::parse(slurp(out / "summary.json")));
}

TEST_F(CliTest, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(MOE_LAB_CONFIG_DIR)) {
    const auto j = nlohmann::json::parse(slurp(e.path()));
    EXPECT_TRUE(j.contains("setting")) << e.path();
  }
}
