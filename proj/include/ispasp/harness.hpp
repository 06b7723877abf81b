#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "ispasp/matrix.hpp"

namespace ispasp::harness {

inline constexpr int kSchemaVersion = 1;

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are read through the size_t overload");

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` lines. `#` starts a comment; blank lines are skipped.
/// Duplicate keys and lines without `=` are errors.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);

/// Typed access to a KeyValues map. Every key must be consumed before
/// finish(), otherwise the leftovers are reported as unknown.
class ConfigReader {
 public:
  explicit ConfigReader(KeyValues kv) : kv_(std::move(kv)) {}

  void read(std::string_view key, double& out);
  void read(std::string_view key, std::size_t& out);
  void read(std::string_view key, bool& out);
  void read(std::string_view key, std::string& out);
  void read(std::string_view key, std::vector<double>& out);
  void read(std::string_view key, std::vector<std::size_t>& out);
  void read(std::string_view key, std::vector<std::string>& out);

  void finish() const;

 private:
  std::optional<std::string> take(std::string_view key);
  KeyValues kv_;
  std::set<std::string, std::less<>> used_;
};

// ---------------------------------------------------------------- tables

/// A CSV table; columns listed in `timing` hold wall-clock values and are
/// dropped by the deterministic rendering.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::set<std::string> timing;

  void add_row(std::vector<std::string> row);
  std::size_t column(std::string_view name) const;
};

std::string fmt(double v);
std::string fmt(std::size_t v);

void write_csv(std::ostream& out, const Table& table, bool include_timing = true);
std::string to_csv(const Table& table, bool include_timing = true);
void save_csv(const std::filesystem::path& path, const Table& table);
Table read_csv(std::istream& in);
Table load_csv(const std::filesystem::path& path);

/// Header `rows,cols`, a line with the two sizes, then one line per row.
void write_matrix_csv(std::ostream& out, const DenseMatrix& m);
DenseMatrix read_matrix_csv(std::istream& in);

// ---------------------------------------------------------------- slopes

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t used = 0;
  std::size_t excluded_nonpositive = 0;
};

/// Ordinary least squares on (ln s, ln value). Nonpositive values are
/// dropped and counted; fewer than three survivors is an error.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

// ---------------------------------------------------------------- experiments

struct RunOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  int workers = 1;
  std::optional<std::uint64_t> seed;
  std::string preset;
  bool verbose = false;
};

struct SyntheticConfig {
  std::vector<double> p{0.3, 0.5, 0.7, 0.9};
  std::vector<std::size_t> d_hid{100, 200};
  std::size_t d_out = 0;  // 0: same as d_hid
  std::size_t batch = 100;
  double magnitude = 1.0;
  std::size_t matrices = 3;
  std::size_t iterations = 20;
  std::size_t stride = 1;
  double fit_lo = 0.05;
  double fit_hi = 0.8;
  std::uint64_t seed = 0;

  static SyntheticConfig from(ConfigReader& reader);
  void validate() const;
};

struct SyntheticResult {
  Table runs;     // one row per (p, d_hid, matrix, s)
  Table summary;  // mean over matrices per (p, d_hid, s)
  Table slopes;   // one fit per (p, d_hid)
};

SyntheticResult run_synthetic(const SyntheticConfig& cfg, const RunOptions& opt);

struct BoundsConfig {
  std::size_t instances = 20;
  std::size_t rows = 40000;
  std::size_t cols = 40;  // d_hid
  std::size_t s = 8;
  std::size_t batch = 100;
  double p = 0.5;
  double magnitude = 1.0;
  std::size_t iterations = 20;
  std::size_t rip_samples = 2000;
  double rip_limit = 0.1;
  std::size_t reference_rows = 400;  // δ reported for this aspect ratio too
  // noise-bound sweep over compressible matrices
  std::vector<double> sweep_p{0.3, 0.5, 0.7, 0.9};
  std::vector<std::size_t> sweep_d_hid{100, 200};
  std::size_t sweep_matrices = 3;
  std::uint64_t seed = 0;

  static BoundsConfig from(ConfigReader& reader);
  void validate() const;
};

struct BoundsResult {
  Table instances;  // one row per instance: δ estimates and premise flags
  Table trace;      // one row per (instance, t): measured vs bound
  Table noise;      // one row per (p, d_hid, matrix, s)
  std::size_t trace_violations = 0;
  std::size_t noise_violations = 0;
  std::size_t premise_failures = 0;
  std::vector<std::string> failures;  // human readable
};

BoundsResult run_bounds(const BoundsConfig& cfg, const RunOptions& opt);

struct RuntimeConfig {
  std::size_t d_in = 100;
  std::size_t d_hid = 1000;
  std::size_t d_out = 10;
  std::size_t batch = 256;
  std::vector<double> s_fractions{0.1, 0.2, 0.4};
  std::size_t repeats = 5;
  std::size_t iterations = 20;
  std::size_t gfs_pool = 50;
  std::uint64_t seed = 0;

  static RuntimeConfig from(ConfigReader& reader);
  void validate() const;
};

struct RuntimeResult {
  Table runs;     // every timed run
  Table summary;  // median per (algorithm, s)
};

RuntimeResult run_runtime(const RuntimeConfig& cfg, const RunOptions& opt);

struct MnistConfig {
  std::filesystem::path data_dir;    // empty: environment variable
  std::filesystem::path checkpoint;  // empty: <out>/dense.ckpt
  std::size_t d_hid = 1000;
  std::size_t pretrain_epochs = 30;
  double pretrain_lr = 1e-3;
  std::size_t finetune_epochs = 10;
  double finetune_lr = 1e-3;
  double momentum = 0.9;
  std::size_t train_batch = 128;
  double val_fraction = 0.2;
  std::vector<std::size_t> s{50, 100, 200};
  std::vector<std::string> algorithms{"ispasp", "gfs", "topk"};
  std::size_t trials = 3;
  std::size_t prune_batch = 512;
  std::size_t prune_iterations = 20;
  std::size_t gfs_pool = 0;
  std::uint64_t seed = 0;

  static MnistConfig from(ConfigReader& reader);
  void validate() const;
};

struct MnistResult {
  Table runs;     // one row per (algorithm, s, trial)
  Table summary;  // mean per (algorithm, s)
  double dense_test_accuracy = 0.0;
};

MnistResult run_mnist(const MnistConfig& cfg, const RunOptions& opt);

/// Trains (or loads) the dense network for `cfg` and returns the checkpoint path.
std::filesystem::path ensure_checkpoint(const MnistConfig& cfg, const RunOptions& opt);

/// Named parameter sets: "desk" (default) and "paper".
KeyValues preset_keys(std::string_view kind, std::string_view preset);

/// Preset keys, then file keys on top.
KeyValues merge_keys(const KeyValues& base, const KeyValues& overrides);

}  // namespace ispasp::harness
