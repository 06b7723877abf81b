#include <CLI11.hpp>

#include <iostream>

#include "ispasp/harness.hpp"
#include "ispasp/kernels.hpp"
#include "ispasp/mlp.hpp"

namespace h = ispasp::harness;

namespace {

struct Common {
  std::string config;
  std::string out = "results";
  int workers = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string preset = "desk";
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value config file");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--workers", c.workers, "concurrent grid cells")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&c](const std::uint64_t& v) {
        c.seed = v;
        c.seed_set = true;
      },
      "master seed (overrides the config)");
  cmd->add_option("--preset", c.preset, "desk or paper")->capture_default_str();
  cmd->add_flag("-v,--verbose", c.verbose, "progress on stderr");
}

h::ConfigReader reader_for(std::string_view kind, const Common& c, const std::string& data_dir = {}) {
  h::KeyValues kv = h::preset_keys(kind, c.preset);
  if (!c.config.empty()) kv = h::merge_keys(kv, h::read_key_values(c.config));
  if (!data_dir.empty()) kv["data_dir"] = data_dir;
  return h::ConfigReader(std::move(kv));
}

h::RunOptions options_for(const Common& c) {
  h::RunOptions opt;
  opt.out_dir = c.out;
  opt.workers = c.workers;
  if (c.seed_set) opt.seed = c.seed;
  opt.preset = c.preset;
  opt.verbose = c.verbose;
  return opt;
}

void print(const h::Table& t) { h::write_csv(std::cout, t); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"i-SpaSP structured pruning experiments"};
  app.require_subcommand(1);

  Common synthetic_opts, bounds_opts, runtime_opts, mnist_opts, checkpoint_opts;
  auto* synthetic = app.add_subcommand("synthetic", "residual decay on compressible hidden matrices");
  add_common(synthetic, synthetic_opts);
  auto* bounds = app.add_subcommand("bounds", "measured residuals against the analytic bounds");
  add_common(bounds, bounds_opts);
  auto* runtime = app.add_subcommand("runtime", "wall-clock of i-SpaSP against GFS");
  add_common(runtime, runtime_opts);
  auto* mnist = app.add_subcommand("mnist", "prune and fine-tune a two-layer MNIST network");
  add_common(mnist, mnist_opts);
  auto* checkpoint = app.add_subcommand("checkpoint", "train and save the dense MNIST network");
  add_common(checkpoint, checkpoint_opts);
  std::string data_dir;
  for (auto* cmd : {mnist, checkpoint}) cmd->add_option("--data-dir", data_dir, "MNIST IDX directory (else $ISPASP_MNIST_DIR)");

  auto* slope = app.add_subcommand("slope", "fit log-log slopes from a CSV");
  std::string slope_csv, x_col = "s", y_col = "mean_v_fro_sq";
  std::vector<std::string> group_cols{"p", "d_hid"};
  double s_lo = 0.0, s_hi = std::numeric_limits<double>::infinity();
  slope->add_option("csv", slope_csv, "input CSV")->required()->check(CLI::ExistingFile);
  slope->add_option("--x", x_col, "x column")->capture_default_str();
  slope->add_option("--y", y_col, "y column")->capture_default_str();
  slope->add_option("--group", group_cols, "grouping columns");
  slope->add_option("--min", s_lo, "smallest x kept");
  slope->add_option("--max", s_hi, "largest x kept");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synthetic->parsed()) {
      auto reader = reader_for("synthetic", synthetic_opts);
      const auto res = h::run_synthetic(h::SyntheticConfig::from(reader), options_for(synthetic_opts));
      print(res.slopes);
    } else if (bounds->parsed()) {
      auto reader = reader_for("bounds", bounds_opts);
      const auto res = h::run_bounds(h::BoundsConfig::from(reader), options_for(bounds_opts));
      print(res.instances);
      std::cout << "trace_violations," << res.trace_violations << "\nnoise_violations," << res.noise_violations
                << "\npremise_failures," << res.premise_failures << '\n';
      for (const auto& f : res.failures) std::cerr << f << '\n';
      return res.trace_violations + res.noise_violations == 0 ? 0 : 1;
    } else if (runtime->parsed()) {
      auto reader = reader_for("runtime", runtime_opts);
      print(h::run_runtime(h::RuntimeConfig::from(reader), options_for(runtime_opts)).summary);
    } else if (mnist->parsed()) {
      auto reader = reader_for("mnist", mnist_opts, data_dir);
      const auto res = h::run_mnist(h::MnistConfig::from(reader), options_for(mnist_opts));
      std::cout << "dense_test_acc," << res.dense_test_accuracy << '\n';
      print(res.summary);
    } else if (checkpoint->parsed()) {
      auto reader = reader_for("mnist", checkpoint_opts, data_dir);
      std::cout << h::ensure_checkpoint(h::MnistConfig::from(reader), options_for(checkpoint_opts)).string() << '\n';
    } else if (slope->parsed()) {
      const h::Table t = h::load_csv(slope_csv);
      const std::size_t xc = t.column(x_col), yc = t.column(y_col);
      std::vector<std::size_t> gc;
      for (const auto& g : group_cols) gc.push_back(t.column(g));
      std::map<std::vector<std::string>, std::vector<std::pair<double, double>>> groups;
      for (const auto& row : t.rows) {
        const double x = std::stod(row[xc]);
        if (x < s_lo || x > s_hi) continue;
        std::vector<std::string> key;
        for (std::size_t c : gc) key.push_back(row[c]);
        groups[key].emplace_back(x, std::stod(row[yc]));
      }
      for (const auto& g : group_cols) std::cout << g << ',';
      std::cout << "slope,intercept,r2,points,excluded_nonpositive\n";
      for (const auto& [key, pts] : groups) {
        const auto fit = h::fit_loglog_slope(pts);
        for (const auto& k : key) std::cout << k << ',';
        std::cout << h::fmt(fit.slope) << ',' << h::fmt(fit.intercept) << ',' << h::fmt(fit.r2) << ',' << fit.used
                  << ',' << fit.excluded_nonpositive << '\n';
      }
    }
  } catch (const ispasp::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ispasp::TrainingDiverged::kExitCode;
  } catch (const h::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
