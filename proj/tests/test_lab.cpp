#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "latentlab/lab/scenarios.hpp"
#include "latentlab/lab/sweep.hpp"

namespace latentlab::lab {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

TEST(Stats, Median) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_EQ(median({1.0, INFINITY, INFINITY}), INFINITY);
  EXPECT_THROW(median({}), ConfigError);
}

TEST(Report, ChecksDecidePass) {
  ExperimentReport r;
  r.scenario = "x";
  EXPECT_TRUE(r.passed());
  r.check("a", true);
  r.check("b", false, "why");
  EXPECT_FALSE(r.passed());
  ASSERT_NE(r.find_check("b"), nullptr);
  EXPECT_EQ(r.find_check("b")->detail, "why");
  EXPECT_EQ(r.find_check("c"), nullptr);
  EXPECT_EQ(r.checks_table().to_string(), "check,passed,detail\na,1,\nb,0,why\n");
}

TEST(Report, TextTableAlignsColumns) {
  CsvTable t{{"a", "long_name"}, {}};
  t.add({"12345", "x"});
  EXPECT_EQ(text_table(t), "a      long_name\n12345  x\n");
}

TEST(Report, EmitWritesTablesChecksAndSummary) {
  ExperimentReport r;
  r.scenario = "demo";
  r.seeds = {1, 2};
  CsvTable t{{"k", "v"}, {}};
  t.add({"1", "0.5"});
  r.add_table("metrics", t);
  r.check("ok", true);
  const auto dir = std::filesystem::temp_directory_path() / "latentlab_test_emit";
  std::filesystem::remove_all(dir);
  emit_report(r, dir, OutputFormat::Txt);
  EXPECT_EQ(slurp(dir / "demo" / "metrics.csv"), "k,v\n1,0.5\n");
  EXPECT_TRUE(std::filesystem::exists(dir / "demo" / "metrics.txt"));
  EXPECT_EQ(slurp(dir / "demo" / "checks.csv"), "check,passed,detail\nok,1,\n");
  EXPECT_EQ(slurp(dir / "demo" / "summary.txt").rfind("scenario demo: PASS\nseeds 2 (1..2)\n", 0), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Scenarios, NamesAreUniqueAndUnknownIsConfigError) {
  std::set<std::string> names;
  for (const auto& s : scenario_library()) EXPECT_TRUE(names.insert(s.name).second) << s.name;
  EXPECT_GE(names.size(), 10u);
  EXPECT_THROW(run_scenario("no-such-scenario"), ConfigError);
  EXPECT_THROW(run_scenario("insufficient", {{}, std::nullopt}), ConfigError);
}

TEST(Scenarios, SameSeedsSameTables) {
  const ScenarioOptions opt{seed_range(7, 3), std::nullopt};
  const auto a = run_scenario("convergence", opt);
  const auto b = run_scenario("convergence", opt);
  ASSERT_EQ(a.tables.size(), b.tables.size());
  for (std::size_t i = 0; i < a.tables.size(); ++i)
    EXPECT_EQ(a.tables[i].table.to_string(), b.tables[i].table.to_string());
  const auto c = run_scenario("convergence", {seed_range(100, 3), std::nullopt});
  EXPECT_NE(a.tables[0].table.to_string(), c.tables[0].table.to_string());
}

TEST(Scenarios, ExactScenariosPassWithOneSeed) {
  const ScenarioOptions opt{{1}, std::nullopt};
  for (const char* name : {"mixture-identifiable", "mixture-confusable", "rag-useless", "tool-state"}) {
    const auto r = run_scenario(name, opt);
    EXPECT_TRUE(r.passed()) << summary_text(r);
  }
}

TEST(Scenarios, TinyBudgetIsReported) {
  EXPECT_THROW(run_scenario("insufficient", {{1}, 2}), Error);
}

TEST(Sweep, GridValidation) {
  SweepGrid g;
  g.alpha.clear();
  EXPECT_THROW(g.validate(), ConfigError);
  g = SweepGrid{};
  g.temperature = {0.0};
  EXPECT_THROW(g.validate(), ConfigError);
  g = SweepGrid{};
  g.alpha = {1.5};
  EXPECT_THROW(g.validate(), ConfigError);
  EXPECT_EQ(parse_double_list("0.25,0.5,1"), (std::vector<double>{0.25, 0.5, 1.0}));
  EXPECT_EQ(parse_size_list("100,1000"), (std::vector<std::size_t>{100, 1000}));
  EXPECT_THROW(parse_double_list("0.5,,1"), ConfigError);
  EXPECT_THROW(parse_size_list("-1"), ConfigError);
}

TEST(Sweep, EntropyNonDecreasingAlongTemperatureGrid) {
  const auto world = build_world(worlds::collapse_spec());
  SweepGrid g;
  g.temperature = {0.25, 0.5, 1.0, 2.0, 4.0};
  g.n_transitions = {400};
  const auto t = run_sweep(world, g, seed_range(1, 5));
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.header[8], "median_entropy_bits");
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    EXPECT_GE(parse_double(t.rows[i][8]), parse_double(t.rows[i - 1][8]));
}

TEST(Sweep, KlDecreasesAlongNGrid) {
  const auto world = build_world(worlds::noisy_latent_spec());
  SweepGrid g;
  g.n_transitions = {100, 1000, 10000};
  const auto t = run_sweep(world, g, seed_range(1, 9));
  ASSERT_EQ(t.rows.size(), 3u);
  for (std::size_t i = 1; i < t.rows.size(); ++i)
    EXPECT_LT(parse_double(t.rows[i][7]), parse_double(t.rows[i - 1][7]));
}

TEST(Sweep, OutputIndependentOfThreadCount) {
  const auto world = build_world(worlds::collapse_spec());
  SweepGrid g;
  g.n_transitions = {200, 800};
  g.alpha = {0.0, 0.5};
  g.temperature = {0.5, 2.0};
  const auto one = run_sweep(world, g, seed_range(1, 3), 1);
  const auto many = run_sweep(world, g, seed_range(1, 3), 4);
  EXPECT_EQ(one.rows.size(), g.cell_count());
  EXPECT_EQ(one.to_string(), many.to_string());
}

TEST(Parallel, RethrowsLowestFailingIndex) {
  std::vector<int> out(50, 0);
  parallel_for(50, [&](std::size_t i) { out[i] = static_cast<int>(i); }, 4);
  EXPECT_EQ(out[49], 49);
  try {
    parallel_for(50, [](std::size_t i) { if (i % 10 == 7) throw ConfigError(std::to_string(i)); }, 4);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "7");
  }
}

TEST(Scenarios, ParallelRunMatchesSerial) {
  const ScenarioOptions opt{seed_range(3, 3), std::nullopt};
  const std::vector<std::string> names{"convergence", "tool-state", "drift"};
  const auto reports = run_scenarios(names, opt, 3);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto serial = run_scenario(names[i], opt);
    EXPECT_EQ(reports[i].scenario, names[i]);
    EXPECT_EQ(reports[i].checks_table().to_string(), serial.checks_table().to_string());
  }
}

TEST(Sweep, AlphaCellsRunTheRecursion) {
  const auto world = build_world(worlds::collapse_spec());
  SweepGrid g;
  g.n_transitions = {2000};
  g.alpha = {0.0, 1.0};
  g.smoothing = {0.1};
  const auto t = run_sweep(world, g, seed_range(1, 5));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_LT(parse_double(t.rows[0][7]), parse_double(t.rows[1][7]));
}

} // namespace
} // namespace latentlab::lab
