#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "moelab/csv_io.hpp"
#include "moelab/errors.hpp"
#include "moelab/harness.hpp"
#include "moelab/json_io.hpp"

using namespace moe;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n_grid = {200, 400};
  cfg.replications = 3;
  cfg.fit.max_em_iters = 25;
  cfg.seed = 99;
  cfg.workers = 1;
  return cfg;
}

std::vector<ExperimentRow> parse_raw(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<ExperimentRow> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    ExperimentRow r;
    r.n = std::stoul(f[0]);
    r.replication = std::stoi(f[1]);
    r.loss_kind = f[2];
    r.value = f[3].empty() ? std::nan("") : std::stod(f[3]);
    rows.push_back(r);
  }
  return rows;
}

class HarnessTest : public ::testing::Test {
 protected:
  void SetUp() override { unsetenv("MOE_LAB_WORKERS"); }
};

}  // namespace

TEST(LogGrid, Endpoints) {
  const auto g = log_grid(1e3, 2e4, 10);
  ASSERT_EQ(g.size(), 10u);
  EXPECT_EQ(g.front(), 1000u);
  EXPECT_EQ(g.back(), 20000u);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  const auto small = log_grid(1, 3, 10);
  EXPECT_EQ(small, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Config, ParsesAndRejectsUnknownKeys) {
  const auto j = nlohmann::json::parse(
      R"J({"setting":"over","gate":{"kind":"sigmoid"},"n_grid":[100,200],"replications":2,"losses":["D3(2)","D4"],
          "fit":{"max_em_iters":7},"seed":5,"workers":2})J");
  const ExperimentConfig cfg = experiment_config_from_json(j);
  EXPECT_EQ(cfg.setting, ExperimentConfig::Setting::Over);
  EXPECT_EQ(cfg.fitted_k(), 3u);
  EXPECT_EQ(cfg.gate, GateSpec::activated(Activation::sigmoid()));
  EXPECT_EQ(cfg.n_grid, (std::vector<std::size_t>{100, 200}));
  EXPECT_EQ(cfg.losses[0], LossKind::d3(2));
  EXPECT_EQ(cfg.fit.max_em_iters, 7);
  EXPECT_EQ(cfg.seed, 5u);
  EXPECT_THROW(experiment_config_from_json(nlohmann::json::parse(R"({"bogus":1})")), ArgumentError);
  EXPECT_THROW(experiment_config_from_json(nlohmann::json::parse(R"({"fit":{"bogus":1}})")), ArgumentError);
  EXPECT_THROW(experiment_config_from_json(nlohmann::json::parse(R"({"n_grid":[200,100]})")), ArgumentError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), IoError);
}

TEST(Config, DeskProfile) {
  const ExperimentConfig cfg = experiment_config_from_json(nlohmann::json::parse(R"({"profile":"desk","seed":3})"));
  EXPECT_EQ(cfg.n_grid, log_grid(1e3, 2e4, 10));
  EXPECT_EQ(cfg.replications, 10);
  EXPECT_EQ(cfg.fit.max_em_iters, 300);
  EXPECT_EQ(cfg.seed, 3u);
}

TEST_F(HarnessTest, RowCountsAndAggregates) {
  const ExperimentConfig cfg = small_config();
  const ExperimentResult res = run_experiment(cfg);
  EXPECT_EQ(res.tasks, 6u);
  EXPECT_EQ(res.rows.size(), 2u * 3u * 2u);
  EXPECT_EQ(res.aggregates.size(), 4u);
  EXPECT_FALSE(res.degraded);
  for (const Aggregate& a : res.aggregates) EXPECT_LE(a.count, 3u);
  // Re-aggregating the raw CSV reproduces the summary.
  const auto again = aggregate_rows(parse_raw(raw_csv(res)));
  ASSERT_EQ(again.size(), res.aggregates.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].loss_kind, res.aggregates[i].loss_kind);
    EXPECT_EQ(again[i].n, res.aggregates[i].n);
    EXPECT_EQ(again[i].count, res.aggregates[i].count);
    if (again[i].count > 0) {
      EXPECT_NEAR(again[i].mean, res.aggregates[i].mean, 1e-12 * std::abs(again[i].mean));
    }
  }
  EXPECT_EQ(summary_csv(res).substr(0, 25), "loss_kind,n,mean,sd,count");
  const nlohmann::json j = nlohmann::json::parse(summary_json(res));
  EXPECT_EQ(j["schema"], 1);
}

TEST_F(HarnessTest, DeterministicAcrossWorkerCounts) {
  ExperimentConfig cfg = small_config();
  const std::string one = raw_csv(run_experiment(cfg));
  cfg.workers = 4;
  EXPECT_EQ(raw_csv(run_experiment(cfg)), one);
  setenv("MOE_LAB_WORKERS", "3", 1);
  EXPECT_EQ(resolve_workers(cfg), 3);
  EXPECT_EQ(raw_csv(run_experiment(cfg)), one);
  unsetenv("MOE_LAB_WORKERS");
}

TEST_F(HarnessTest, SeedsDependOnlyOnGridPosition) {
  ExperimentConfig cfg = small_config();
  const ExperimentResult full = run_experiment(cfg);
  cfg.replications = 2;
  const ExperimentResult fewer = run_experiment(cfg);
  for (const ExperimentRow& r : fewer.rows) {
    bool matched = false;
    for (const ExperimentRow& s : full.rows) {
      if (s.n == r.n && s.replication == r.replication && s.loss_kind == r.loss_kind) {
        EXPECT_EQ(s.seed, r.seed);
        if (std::isnan(r.value)) EXPECT_TRUE(std::isnan(s.value));
        else EXPECT_EQ(s.value, r.value);
        matched = true;
      }
    }
    EXPECT_TRUE(matched);
  }
  cfg.seed = 100;
  EXPECT_NE(run_experiment(cfg).rows[0].seed, fewer.rows[0].seed);
}

TEST_F(HarnessTest, EmptyResultWritesHeaders) {
  const ExperimentResult empty;
  EXPECT_EQ(raw_csv(empty), "n,replication,loss_kind,value,em_iters,converged,seed_hex\n");
  EXPECT_EQ(summary_csv(empty), "loss_kind,n,mean,sd,count\n");
  const auto dir = std::filesystem::temp_directory_path() / "moelab_harness_empty";
  std::filesystem::create_directories(dir);
  emit_csv(empty, (dir / "raw.csv").string());
  emit_summary(empty, (dir / "summary.csv").string(), (dir / "summary.json").string());
  EXPECT_EQ(read_text_file((dir / "raw.csv").string()), raw_csv(empty));
  EXPECT_NO_THROW(nlohmann::json::parse(read_text_file((dir / "summary.json").string())));
  std::filesystem::remove_all(dir);
}

TEST_F(HarnessTest, ReplicationIsSeeded) {
  const ExperimentConfig cfg = small_config();
  const ReplicationOutcome a = run_replication(cfg, 300, 7);
  const ReplicationOutcome b = run_replication(cfg, 300, 7);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(a.fit.measure, b.fit.measure);
  EXPECT_EQ(a.losses.size(), cfg.losses.size());
}

TEST(Slopes, FitPerLossKind) {
  std::vector<Aggregate> aggs;
  for (std::size_t n : {100u, 1000u, 10000u}) {
    aggs.push_back({"D2", n, 3.0 / std::sqrt(double(n)), 0.0, 5});
    aggs.push_back({"D4", n, 0.0, 0.0, 0});
  }
  const auto slopes = fit_slopes(aggs);
  ASSERT_EQ(slopes.size(), 1u);
  EXPECT_EQ(slopes[0].loss_kind, "D2");
  EXPECT_NEAR(slopes[0].fit.slope, -0.5, 1e-12);
}
