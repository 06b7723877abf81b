#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "ispasp/harness.hpp"
#include "ispasp/synthetic.hpp"

using namespace ispasp;
using namespace ispasp::harness;

TEST(Config, ParsesKeyValues) {
  const auto kv = parse_key_values("# comment\n p = 0.3, 0.5 \n\nd_hid=100 # trailing\nname = x\n");
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv.at("p"), "0.3, 0.5");
  EXPECT_EQ(kv.at("d_hid"), "100");
  EXPECT_THROW(parse_key_values("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse_key_values("just words\n"), ConfigError);
  EXPECT_THROW(parse_key_values(" = 3\n"), ConfigError);
}

TEST(Config, TypedReadsAndUnknownKeys) {
  ConfigReader r(parse_key_values("p = 0.3, 0.9\nd_hid = 50\nmatrices = 2\n"));
  const auto cfg = SyntheticConfig::from(r);
  EXPECT_EQ(cfg.p, (std::vector<double>{0.3, 0.9}));
  EXPECT_EQ(cfg.d_hid, (std::vector<std::size_t>{50}));
  EXPECT_EQ(cfg.matrices, 2u);
  EXPECT_EQ(cfg.batch, 100u);

  ConfigReader typo(parse_key_values("matrixes = 2\n"));
  EXPECT_THROW(SyntheticConfig::from(typo), ConfigError);
  ConfigReader bad_number(parse_key_values("batch = -3\n"));
  EXPECT_THROW(SyntheticConfig::from(bad_number), ConfigError);
  ConfigReader bad_p(parse_key_values("p = 1.5\n"));
  EXPECT_THROW(SyntheticConfig::from(bad_p), ConfigError);
}

TEST(Config, PresetsAndOverrides) {
  EXPECT_TRUE(preset_keys("mnist", "desk").empty());
  const auto paper = preset_keys("mnist", "paper");
  EXPECT_EQ(paper.at("d_hid"), "10000");
  EXPECT_EQ(paper.at("pretrain_epochs"), "200");
  EXPECT_THROW(preset_keys("mnist", "huge"), ConfigError);
  const auto merged = merge_keys(paper, {{"d_hid", "500"}});
  EXPECT_EQ(merged.at("d_hid"), "500");
  EXPECT_EQ(merged.at("pretrain_epochs"), "200");
}

TEST(Csv, RoundTrip) {
  Table t;
  t.header = {"a", "b", "ms"};
  t.timing = {"ms"};
  t.add_row({"1", "x", "3.5"});
  t.add_row({"2", "y", "4"});
  EXPECT_THROW(t.add_row({"1"}), ShapeError);
  std::istringstream in(to_csv(t));
  const Table back = read_csv(in);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(to_csv(t, false), "a,b\n1,x\n2,y\n");
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_THROW(t.column("zz"), RangeError);
}

TEST(Csv, NumberFormattingRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9}) EXPECT_EQ(std::stod(fmt(v)), v);
  EXPECT_EQ(fmt(0.5), "0.5");
  EXPECT_EQ(fmt(std::size_t{42}), "42");
}

TEST(Csv, MatrixRoundTripIsExact) {
  const auto m = synthetic::gen_standard_normal(4, 3, 7);
  std::stringstream buf;
  write_matrix_csv(buf, m);
  EXPECT_EQ(read_matrix_csv(buf), m);
}

TEST(Slope, RecoversPowerLaw) {
  std::vector<std::pair<double, double>> pts;
  for (double s = 1; s <= 20; ++s) pts.emplace_back(s, 3.0 * std::pow(s, -2.0));
  const auto fit = fit_loglog_slope(pts);
  EXPECT_NEAR(fit.slope, -2.0, 1e-9);
  EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-9);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);
  EXPECT_EQ(fit.used, 20u);
}

TEST(Slope, ConstantHasZeroSlope) {
  const auto fit = fit_loglog_slope({{1, 2}, {2, 2}, {4, 2}});
  EXPECT_NEAR(fit.slope, 0.0, 1e-15);
  EXPECT_EQ(fit.r2, 1.0);
}

TEST(Slope, NonpositiveValuesAreExcluded) {
  const auto fit = fit_loglog_slope({{1, 1}, {2, 0.5}, {3, 0.0}, {4, 0.25}, {5, -1.0}});
  EXPECT_EQ(fit.used, 3u);
  EXPECT_EQ(fit.excluded_nonpositive, 2u);
  EXPECT_NEAR(fit.slope, -1.0, 1e-12);
  EXPECT_THROW(fit_loglog_slope({{1, 1}, {2, 0}, {3, 1}}), RangeError);
  EXPECT_THROW(fit_loglog_slope({{2, 1}, {2, 2}, {2, 3}}), RangeError);
}

TEST(Synthetic, SmallRunIsDeterministicAcrossWorkers) {
  SyntheticConfig cfg;
  cfg.p = {0.3, 0.9};
  cfg.d_hid = {20};
  cfg.batch = 10;
  cfg.matrices = 2;
  cfg.iterations = 5;
  RunOptions one, four;
  four.workers = 4;
  const auto a = run_synthetic(cfg, one);
  const auto b = run_synthetic(cfg, four);
  EXPECT_EQ(to_csv(a.runs, false), to_csv(b.runs, false));
  EXPECT_EQ(to_csv(a.summary, false), to_csv(b.summary, false));
  EXPECT_EQ(to_csv(a.slopes, false), to_csv(b.slopes, false));
  EXPECT_EQ(a.runs.rows.size(), 2u * 2u * 20u);
  EXPECT_EQ(a.slopes.rows.size(), 2u);
  EXPECT_EQ(to_csv(run_synthetic(cfg, one).runs, false), to_csv(a.runs, false));

  RunOptions other;
  other.seed = 9;
  EXPECT_NE(to_csv(run_synthetic(cfg, other).runs, false), to_csv(a.runs, false));
}

TEST(Bounds, SmallRunHasNoViolations) {
  BoundsConfig cfg;
  cfg.instances = 2;
  cfg.rows = 40000;
  cfg.rip_samples = 50;
  cfg.sweep_p = {0.5};
  cfg.sweep_d_hid = {30};
  cfg.sweep_matrices = 1;
  const auto r = run_bounds(cfg, RunOptions{});
  EXPECT_EQ(r.trace_violations, 0u);
  EXPECT_EQ(r.noise_violations, 0u);
  EXPECT_EQ(r.premise_failures, 0u);
  EXPECT_EQ(r.instances.rows.size(), 2u);
  EXPECT_EQ(r.noise.rows.size(), 30u);
}

TEST(Config, ShippedFilesParse) {
  const std::filesystem::path dir = std::filesystem::path(ISPASP_SOURCE_DIR) / "configs";
  auto reader = [&](const char* name) { return ConfigReader(read_key_values(dir / name)); };
  auto s = reader("synthetic.conf");
  EXPECT_EQ(SyntheticConfig::from(s).p, SyntheticConfig{}.p);
  auto b = reader("bounds.conf");
  EXPECT_EQ(BoundsConfig::from(b).rows, BoundsConfig{}.rows);
  auto r = reader("runtime.conf");
  EXPECT_EQ(RuntimeConfig::from(r).d_hid, RuntimeConfig{}.d_hid);
  auto m = reader("mnist.conf");
  EXPECT_EQ(MnistConfig::from(m).s, MnistConfig{}.s);
}
