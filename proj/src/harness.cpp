#include "ispasp/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "ispasp/bounds.hpp"
#include "ispasp/mlp.hpp"
#include "ispasp/mnist.hpp"
#include "ispasp/prng.hpp"
#include "ispasp/pruner.hpp"
#include "ispasp/synthetic.hpp"

namespace ispasp::harness {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(std::string(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view key, const std::string& text) {
  double v = 0.0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v)) {
    throw ConfigError("config: `" + std::string(key) + "` expects a number, got `" + text + "`");
  }
  return v;
}

std::size_t parse_size(std::string_view key, const std::string& text) {
  std::size_t v = 0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError("config: `" + std::string(key) + "` expects a non-negative integer, got `" + text + "`");
  }
  return v;
}

std::string label(std::string_view base, double p, std::size_t d, std::size_t k) {
  return std::string(base) + "/p=" + fmt(p) + "/d=" + fmt(d) + "/k=" + fmt(k);
}

template <class F>
double time_ms(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_outputs(const RunOptions& opt, std::initializer_list<std::pair<const char*, const Table*>> tables) {
  if (opt.out_dir.empty()) return;
  std::filesystem::create_directories(opt.out_dir);
  for (const auto& [name, table] : tables) save_csv(opt.out_dir / name, *table);
}

std::uint64_t effective_seed(std::uint64_t cfg_seed, const RunOptions& opt) { return opt.seed.value_or(cfg_seed); }

int worker_count(const RunOptions& opt) { return std::max(1, opt.workers); }

}  // namespace

// ---------------------------------------------------------------- config

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected `key = value`");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key `" + key + "`");
    }
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str());
}

KeyValues merge_keys(const KeyValues& base, const KeyValues& overrides) {
  KeyValues out = base;
  for (const auto& [k, v] : overrides) out[k] = v;
  return out;
}

std::optional<std::string> ConfigReader::take(std::string_view key) {
  const auto it = kv_.find(std::string(key));
  if (it == kv_.end()) return std::nullopt;
  used_.insert(it->first);
  return it->second;
}

void ConfigReader::read(std::string_view key, double& out) {
  if (auto v = take(key)) out = parse_double(key, *v);
}

void ConfigReader::read(std::string_view key, std::size_t& out) {
  if (auto v = take(key)) out = parse_size(key, *v);
}

void ConfigReader::read(std::string_view key, bool& out) {
  if (auto v = take(key)) {
    if (*v == "true" || *v == "1") {
      out = true;
    } else if (*v == "false" || *v == "0") {
      out = false;
    } else {
      throw ConfigError("config: `" + std::string(key) + "` expects true or false");
    }
  }
}

void ConfigReader::read(std::string_view key, std::string& out) {
  if (auto v = take(key)) out = *v;
}

void ConfigReader::read(std::string_view key, std::vector<double>& out) {
  if (auto v = take(key)) {
    out.clear();
    for (const auto& item : split(*v, ',')) out.push_back(parse_double(key, item));
  }
}

void ConfigReader::read(std::string_view key, std::vector<std::size_t>& out) {
  if (auto v = take(key)) {
    out.clear();
    for (const auto& item : split(*v, ',')) out.push_back(parse_size(key, item));
  }
}

void ConfigReader::read(std::string_view key, std::vector<std::string>& out) {
  if (auto v = take(key)) {
    out.clear();
    for (const auto& item : split(*v, ',')) out.push_back(trim(item));
  }
}

void ConfigReader::finish() const {
  std::string unknown;
  for (const auto& [k, v] : kv_) {
    if (!used_.contains(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) throw ConfigError("config: unknown key(s): " + unknown);
}

KeyValues preset_keys(std::string_view kind, std::string_view preset) {
  if (preset.empty() || preset == "desk") return {};
  if (preset != "paper") throw ConfigError("unknown preset `" + std::string(preset) + "` (expected desk or paper)");
  if (kind == "mnist") {
    return {{"d_hid", "10000"}, {"pretrain_epochs", "200"}, {"pretrain_lr", "0.001"}, {"prune_batch", "512"}};
  }
  return {};
}

// ---------------------------------------------------------------- tables

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) {
    throw ShapeError("Table::add_row: " + std::to_string(row.size()) + " fields for " +
                     std::to_string(header.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

std::size_t Table::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw RangeError("Table: no column `" + std::string(name) + "`");
  return static_cast<std::size_t>(it - header.begin());
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(std::size_t v) { return std::to_string(v); }

void write_csv(std::ostream& out, const Table& table, bool include_timing) {
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (include_timing || !table.timing.contains(table.header[c])) keep.push_back(c);
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < keep.size(); ++k) out << (k ? "," : "") << fields[keep[k]];
    out << '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
}

std::string to_csv(const Table& table, bool include_timing) {
  std::ostringstream os;
  write_csv(os, table, include_timing);
  return os.str();
}

void save_csv(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(out, table);
}

Table read_csv(std::istream& in) {
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw RangeError("read_csv: empty input");
  t.header = split(line, ',');
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.add_row(split(line, ','));
  }
  return t;
}

Table load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_csv(in);
}

void write_matrix_csv(std::ostream& out, const DenseMatrix& m) {
  out << "rows,cols\n" << m.rows() << ',' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << fmt(m(r, c));
    out << '\n';
  }
}

DenseMatrix read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "rows,cols") throw RangeError("matrix csv: missing `rows,cols` header");
  if (!std::getline(in, line)) throw RangeError("matrix csv: missing dimensions");
  const auto dims = split(line, ',');
  if (dims.size() != 2) throw RangeError("matrix csv: bad dimension line");
  const std::size_t rows = parse_size("rows", dims[0]);
  const std::size_t cols = parse_size("cols", dims[1]);
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw RangeError("matrix csv: truncated at row " + std::to_string(r));
    const auto fields = split(line, ',');
    if (fields.size() != cols) throw RangeError("matrix csv: row " + std::to_string(r) + " has wrong width");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = parse_double("value", fields[c]);
  }
  return m;
}

// ---------------------------------------------------------------- slopes

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  SlopeFit fit;
  std::vector<double> xs, ys;
  for (const auto& [s, v] : points) {
    if (!(s > 0.0)) throw RangeError("fit_loglog_slope: s must be positive");
    if (!(v > 0.0)) {
      ++fit.excluded_nonpositive;
      continue;
    }
    xs.push_back(std::log(s));
    ys.push_back(std::log(v));
  }
  fit.used = xs.size();
  if (fit.used < 3) {
    throw RangeError("fit_loglog_slope: " + std::to_string(fit.used) + " usable points, need at least 3");
  }
  const double n = static_cast<double>(fit.used);
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0) throw RangeError("fit_loglog_slope: all s values coincide");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

// ---------------------------------------------------------------- synthetic

SyntheticConfig SyntheticConfig::from(ConfigReader& reader) {
  SyntheticConfig c;
  reader.read("p", c.p);
  reader.read("d_hid", c.d_hid);
  reader.read("d_out", c.d_out);
  reader.read("batch", c.batch);
  reader.read("magnitude", c.magnitude);
  reader.read("matrices", c.matrices);
  reader.read("iterations", c.iterations);
  reader.read("stride", c.stride);
  reader.read("fit_lo", c.fit_lo);
  reader.read("fit_hi", c.fit_hi);
  reader.read("seed", c.seed);
  reader.finish();
  c.validate();
  return c;
}

void SyntheticConfig::validate() const {
  if (p.empty() || d_hid.empty()) throw ConfigError("synthetic: p and d_hid lists must be non-empty");
  for (double v : p)
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("synthetic: every p must lie in (0, 1)");
  for (std::size_t d : d_hid)
    if (d == 0) throw ConfigError("synthetic: d_hid must be >= 1");
  if (batch == 0 || matrices == 0 || iterations == 0 || stride == 0) {
    throw ConfigError("synthetic: batch, matrices, iterations and stride must be >= 1");
  }
  if (!(magnitude > 0.0)) throw ConfigError("synthetic: magnitude must be positive");
  if (!(fit_lo > 0.0 && fit_lo < fit_hi && fit_hi <= 1.0)) throw ConfigError("synthetic: need 0 < fit_lo < fit_hi <= 1");
}

SyntheticResult run_synthetic(const SyntheticConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  const std::uint64_t seed = effective_seed(cfg.seed, opt);

  struct Cell {
    double p;
    std::size_t d;
    std::size_t k;
  };
  std::vector<Cell> cells;
  for (std::size_t d : cfg.d_hid)
    for (double p : cfg.p)
      for (std::size_t k = 0; k < cfg.matrices; ++k) cells.push_back({p, d, k});

  auto s_grid = [&](std::size_t d) {
    std::vector<std::size_t> grid;
    for (std::size_t s = 1; s <= d; s += cfg.stride) grid.push_back(s);
    if (grid.back() != d) grid.push_back(d);
    return grid;
  };

  std::map<std::size_t, DenseMatrix> w1_by_d;
  for (std::size_t d : cfg.d_hid) {
    if (!w1_by_d.contains(d)) {
      const std::size_t d_out = cfg.d_out == 0 ? d : cfg.d_out;
      w1_by_d.emplace(d, synthetic::gen_gaussian_weight(d_out, d, derive_seed(seed, "synthetic/w1/d=" + fmt(d))));
    }
  }

  struct Point {
    double v_sq;
    double hidden;
    double ms;
  };
  std::vector<std::vector<Point>> results(cells.size());

#pragma omp parallel for schedule(dynamic) num_threads(worker_count(opt))
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(cells.size()); ++ci) {
    const Cell& cell = cells[static_cast<std::size_t>(ci)];
    const DenseMatrix& w1 = w1_by_d.at(cell.d);
    const DenseMatrix h = synthetic::gen_compressible(
        {cell.d, cfg.batch, cell.p, cfg.magnitude, derive_seed(seed, label("synthetic/h", cell.p, cell.d, cell.k))});
    auto& out = results[static_cast<std::size_t>(ci)];
    for (std::size_t s : s_grid(cell.d)) {
      prune::PruneParams params;
      params.s = s;
      params.iterations = cfg.iterations;
      prune::PruneResult r;
      const double ms = time_ms([&] { r = prune::ispasp_prune_hidden(w1, h, params); });
      const double v = r.trace.back().residual_norm;
      out.push_back({v * v, r.trace.back().hidden_residual, ms});
    }
  }

  SyntheticResult res;
  res.runs.header = {"run_id", "schema_version", "seed", "p", "d_hid", "d_out", "batch", "magnitude",
                     "iterations", "matrix", "s", "v_fro_sq", "hidden_residual", "elapsed_ms"};
  res.runs.timing = {"elapsed_ms"};
  std::size_t run_id = 0;
  std::map<std::tuple<double, std::size_t, std::size_t>, std::pair<double, std::size_t>> sums;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const Cell& cell = cells[ci];
    const auto grid = s_grid(cell.d);
    const std::size_t d_out = cfg.d_out == 0 ? cell.d : cfg.d_out;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Point& pt = results[ci][g];
      res.runs.add_row({fmt(run_id++), std::to_string(kSchemaVersion), fmt(seed), fmt(cell.p), fmt(cell.d), fmt(d_out),
                        fmt(cfg.batch), fmt(cfg.magnitude), fmt(cfg.iterations), fmt(cell.k), fmt(grid[g]),
                        fmt(pt.v_sq), fmt(pt.hidden), fmt(pt.ms)});
      auto& acc = sums[{cell.p, cell.d, grid[g]}];
      acc.first += pt.v_sq;
      acc.second += 1;
    }
  }

  res.summary.header = {"schema_version", "seed", "p", "d_hid", "s", "matrices", "mean_v_fro_sq"};
  res.slopes.header = {"schema_version", "seed", "p", "d_hid", "s_lo", "s_hi", "slope", "intercept", "r2",
                       "points", "excluded_nonpositive", "reference_rate"};
  for (std::size_t d : cfg.d_hid) {
    for (double p : cfg.p) {
      std::vector<std::pair<double, double>> pts;
      const auto s_lo = static_cast<std::size_t>(std::ceil(cfg.fit_lo * static_cast<double>(d)));
      const auto s_hi = static_cast<std::size_t>(std::floor(cfg.fit_hi * static_cast<double>(d)));
      for (std::size_t s : s_grid(d)) {
        const auto& [total, count] = sums.at({p, d, s});
        const double mean = total / static_cast<double>(count);
        res.summary.add_row({std::to_string(kSchemaVersion), fmt(seed), fmt(p), fmt(d), fmt(s), fmt(count), fmt(mean)});
        if (s >= s_lo && s <= s_hi) pts.emplace_back(static_cast<double>(s), mean);
      }
      const SlopeFit fit = fit_loglog_slope(pts);
      res.slopes.add_row({std::to_string(kSchemaVersion), fmt(seed), fmt(p), fmt(d), fmt(s_lo), fmt(s_hi),
                          fmt(fit.slope), fmt(fit.intercept), fmt(fit.r2), fmt(fit.used),
                          fmt(fit.excluded_nonpositive), fmt(bounds::theorem_final_rate(p))});
    }
  }
  write_outputs(opt, {{"synthetic_runs.csv", &res.runs},
                      {"synthetic_summary.csv", &res.summary},
                      {"synthetic_slopes.csv", &res.slopes}});
  return res;
}

// ---------------------------------------------------------------- bounds

BoundsConfig BoundsConfig::from(ConfigReader& reader) {
  BoundsConfig c;
  reader.read("instances", c.instances);
  reader.read("rows", c.rows);
  reader.read("cols", c.cols);
  reader.read("s", c.s);
  reader.read("batch", c.batch);
  reader.read("p", c.p);
  reader.read("magnitude", c.magnitude);
  reader.read("iterations", c.iterations);
  reader.read("rip_samples", c.rip_samples);
  reader.read("rip_limit", c.rip_limit);
  reader.read("reference_rows", c.reference_rows);
  reader.read("sweep_p", c.sweep_p);
  reader.read("sweep_d_hid", c.sweep_d_hid);
  reader.read("sweep_matrices", c.sweep_matrices);
  reader.read("seed", c.seed);
  reader.finish();
  c.validate();
  return c;
}

void BoundsConfig::validate() const {
  if (instances == 0 || rows == 0 || cols == 0 || batch == 0 || iterations == 0 || rip_samples == 0) {
    throw ConfigError("bounds: sizes and counts must be >= 1");
  }
  if (s == 0 || s > cols) throw ConfigError("bounds: s must lie in [1, cols]");
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("bounds: p must lie in (0, 1)");
  for (double v : sweep_p)
    if (!(v > 0.0 && v < 1.0)) throw ConfigError("bounds: every sweep_p must lie in (0, 1)");
  if (!(magnitude > 0.0)) throw ConfigError("bounds: magnitude must be positive");
}

BoundsResult run_bounds(const BoundsConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  const std::uint64_t seed = effective_seed(cfg.seed, opt);
  const std::size_t rip_order = std::min(4 * cfg.s, cfg.cols);

  struct InstanceOut {
    double delta_sampled = 0.0;
    double delta_certified = 0.0;
    double delta_reference = 0.0;
    double w1_fro = 0.0;
    double mu_h_l2 = 0.0;
    double mu_e_l1 = 0.0;
    std::vector<std::vector<std::string>> trace;
    std::size_t violations = 0;
    std::vector<std::string> failures;
  };
  std::vector<InstanceOut> outs(cfg.instances);

#pragma omp parallel for schedule(dynamic) num_threads(worker_count(opt))
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(cfg.instances); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    InstanceOut& o = outs[i];
    const std::uint64_t inst_seed = derive_seed(seed, "bounds/instance=" + fmt(i));
    const DenseMatrix w1 = synthetic::gen_gaussian_rip(cfg.rows, cfg.cols, derive_seed(inst_seed, "w1"));
    const DenseMatrix w_ref =
        synthetic::gen_gaussian_rip(cfg.reference_rows, cfg.cols, derive_seed(inst_seed, "w1/reference"));
    o.delta_sampled = bounds::rip_constant(w1, rip_order, bounds::RipMode::Sampled, cfg.rip_samples,
                                           derive_seed(inst_seed, "rip"))
                          .delta;
    o.delta_certified = bounds::rip_certified_upper(w1);
    o.delta_reference = bounds::rip_constant(w_ref, rip_order, bounds::RipMode::Sampled, cfg.rip_samples,
                                             derive_seed(inst_seed, "rip/reference"))
                            .delta;
    o.w1_fro = frobenius_norm(w1);

    const DenseMatrix h = synthetic::gen_compressible(
        {cfg.cols, cfg.batch, cfg.p, cfg.magnitude, derive_seed(inst_seed, "h")});
    const bounds::SparseSplit split = bounds::best_s_row_sparse(h, cfg.s);
    const Vector mu_h = mu(h);
    const Vector mu_e = mu(split.noise);
    o.mu_h_l2 = norm_l2(mu_h);
    o.mu_e_l1 = norm_l1(mu_e);

    auto hidden_residual = [&](const IndexSet& active) {
      double acc = 0.0;
      for (std::size_t r = 0; r < mu_h.size(); ++r)
        if (!active.contains(r)) acc += mu_h[r] * mu_h[r];
      return std::sqrt(acc);
    };

    prune::PruneState state = prune::init_state(w1, h);
    double prev_hidden = hidden_residual(state.active);
    for (std::size_t t = 1; t <= cfg.iterations; ++t) {
      const IndexSet prev_active = state.active;
      state = prune::ispasp_step(std::move(state), w1, h, cfg.s, prune::SelectionPolicy::Value);
      const double measured_hidden = hidden_residual(state.active);
      const double measured_out = frobenius_norm(state.residual);
      const double lemma = bounds::lemma_hidden_residual_bound(o.mu_h_l2, o.mu_e_l1, cfg.s, t);
      const double out_bound = o.w1_fro * lemma;
      Vector mu_e_hat = mu_e;
      for (std::size_t r : prev_active) mu_e_hat[r] = 0.0;
      const double step = bounds::recursion_step_bound(prev_hidden, mu_e_hat, cfg.s);

      const bool ok_lemma = measured_hidden <= lemma;
      const bool ok_out = measured_out <= out_bound;
      const bool ok_step = measured_hidden <= step;
      if (!(ok_lemma && ok_out && ok_step)) {
        ++o.violations;
        std::ostringstream msg;
        msg << "instance " << i << " t=" << t << ":";
        if (!ok_lemma) msg << " hidden " << measured_hidden << " > lemma " << lemma << ";";
        if (!ok_out) msg << " output " << measured_out << " > bound " << out_bound << ";";
        if (!ok_step) msg << " hidden " << measured_hidden << " > step " << step << ";";
        msg << " premise delta_" << rip_order << " certified " << o.delta_certified << " (limit " << cfg.rip_limit
            << ")";
        o.failures.push_back(msg.str());
      }
      o.trace.push_back({fmt(i), fmt(t), fmt(measured_hidden), fmt(lemma), fmt(step), fmt(measured_out),
                         fmt(out_bound), ok_lemma && ok_out && ok_step ? "1" : "0"});
      prev_hidden = measured_hidden;
    }
  }

  BoundsResult res;
  res.instances.header = {"run_id", "schema_version", "seed", "rows", "cols", "s", "batch", "p", "rip_order",
                          "rip_samples", "delta_sampled", "delta_certified", "reference_rows", "delta_reference",
                          "premise_ok", "w1_fro", "mu_h_l2", "mu_e_l1", "violations"};
  res.trace.header = {"instance", "t", "hidden_residual", "lemma_bound", "step_bound",
                      "output_residual", "output_bound", "ok"};
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const InstanceOut& o = outs[i];
    const bool premise = o.delta_certified <= cfg.rip_limit && o.delta_sampled <= cfg.rip_limit;
    if (!premise) {
      ++res.premise_failures;
      res.failures.push_back("instance " + fmt(i) + ": premise delta_" + fmt(rip_order) + " <= " +
                             fmt(cfg.rip_limit) + " not certified (sampled " + fmt(o.delta_sampled) +
                             ", certified " + fmt(o.delta_certified) + ")");
    }
    res.instances.add_row({fmt(i), std::to_string(kSchemaVersion), fmt(seed), fmt(cfg.rows), fmt(cfg.cols), fmt(cfg.s),
                           fmt(cfg.batch), fmt(cfg.p), fmt(rip_order), fmt(cfg.rip_samples), fmt(o.delta_sampled),
                           fmt(o.delta_certified), fmt(cfg.reference_rows), fmt(o.delta_reference),
                           premise ? "1" : "0", fmt(o.w1_fro), fmt(o.mu_h_l2), fmt(o.mu_e_l1), fmt(o.violations)});
    for (const auto& row : o.trace) res.trace.add_row(row);
    res.trace_violations += o.violations;
    res.failures.insert(res.failures.end(), o.failures.begin(), o.failures.end());
  }

  // Noise-bound sweep: every s for every generated compressible matrix.
  res.noise.header = {"run_id", "schema_version", "seed", "p", "d_hid", "batch", "magnitude", "matrix", "s",
                      "mu_e_l1", "noise_bound", "ok"};
  std::size_t run_id = 0;
  for (std::size_t d : cfg.sweep_d_hid) {
    for (double p : cfg.sweep_p) {
      for (std::size_t k = 0; k < cfg.sweep_matrices; ++k) {
        const DenseMatrix h = synthetic::gen_compressible(
            {d, cfg.batch, p, cfg.magnitude, derive_seed(seed, label("bounds/noise", p, d, k))});
        const Vector mu_h = mu(h);
        std::vector<double> sorted(mu_h);
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        // Tail sums of the sorted row sums give ||mu(E)||_1 for every s at once.
        std::vector<double> tail(d + 1, 0.0);
        for (std::size_t j = d; j-- > 0;) tail[j] = tail[j + 1] + sorted[j];
        for (std::size_t s = 1; s <= d; ++s) {
          const double e1 = tail[s];
          const double bound = bounds::lemma_noise_bound(cfg.magnitude, p, s);
          const bool ok = e1 <= bound;
          if (!ok) {
            ++res.noise_violations;
            res.failures.push_back("noise bound: p=" + fmt(p) + " d=" + fmt(d) + " k=" + fmt(k) + " s=" + fmt(s) +
                                   ": " + fmt(e1) + " > " + fmt(bound));
          }
          res.noise.add_row({fmt(run_id++), std::to_string(kSchemaVersion), fmt(seed), fmt(p), fmt(d), fmt(cfg.batch),
                             fmt(cfg.magnitude), fmt(k), fmt(s), fmt(e1), fmt(bound), ok ? "1" : "0"});
        }
      }
    }
  }
  write_outputs(opt, {{"bounds_instances.csv", &res.instances},
                      {"bounds_trace.csv", &res.trace},
                      {"bounds_noise.csv", &res.noise}});
  return res;
}

// ---------------------------------------------------------------- runtime

RuntimeConfig RuntimeConfig::from(ConfigReader& reader) {
  RuntimeConfig c;
  reader.read("d_in", c.d_in);
  reader.read("d_hid", c.d_hid);
  reader.read("d_out", c.d_out);
  reader.read("batch", c.batch);
  reader.read("s_fractions", c.s_fractions);
  reader.read("repeats", c.repeats);
  reader.read("iterations", c.iterations);
  reader.read("gfs_pool", c.gfs_pool);
  reader.read("seed", c.seed);
  reader.finish();
  c.validate();
  return c;
}

void RuntimeConfig::validate() const {
  if (d_in == 0 || d_hid == 0 || d_out == 0 || batch == 0 || repeats == 0 || iterations == 0) {
    throw ConfigError("runtime: sizes and counts must be >= 1");
  }
  if (s_fractions.empty()) throw ConfigError("runtime: s_fractions must be non-empty");
  for (double f : s_fractions) {
    const auto s = static_cast<std::size_t>(std::llround(f * static_cast<double>(d_hid)));
    if (!(f > 0.0) || s == 0 || s > d_hid) throw ConfigError("runtime: s fraction " + fmt(f) + " out of range");
  }
}

RuntimeResult run_runtime(const RuntimeConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  const std::uint64_t seed = effective_seed(cfg.seed, opt);
  const TwoLayerNet net(synthetic::gen_gaussian_weight(cfg.d_hid, cfg.d_in, derive_seed(seed, "runtime/w0")),
                        synthetic::gen_gaussian_weight(cfg.d_out, cfg.d_hid, derive_seed(seed, "runtime/w1")));

  RuntimeResult res;
  res.runs.header = {"run_id", "schema_version", "seed", "algorithm", "d_in", "d_hid", "d_out", "batch",
                     "s_fraction", "s", "repeat", "selected", "elapsed_ms"};
  res.runs.timing = {"elapsed_ms"};
  res.summary.header = {"schema_version", "seed", "algorithm", "d_hid", "s_fraction", "s", "repeats",
                        "median_ms"};
  res.summary.timing = {"median_ms"};

  std::size_t run_id = 0;
  for (const char* algorithm : {"ispasp", "gfs", "gfs_pool"}) {
    for (double frac : cfg.s_fractions) {
      const auto s = static_cast<std::size_t>(std::llround(frac * static_cast<double>(cfg.d_hid)));
      std::vector<double> times;
      for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
        const std::uint64_t run_seed = derive_seed(seed, std::string("runtime/") + algorithm + "/s=" + fmt(s) +
                                                             "/rep=" + fmt(rep));
        std::uint64_t draw = 0;
        auto next_input = [&] {
          return synthetic::gen_standard_normal(cfg.d_in, cfg.batch, derive_seed(run_seed, "input/" + fmt(draw++)));
        };
        auto next_labeled = [&] {
          Batch b{next_input(), {}};
          const DenseMatrix logits = forward(net, b.features);
          b.labels.resize(cfg.batch);
          for (std::size_t j = 0; j < cfg.batch; ++j) {
            const auto col = logits.col(j);
            b.labels[j] = static_cast<int>(std::max_element(col.begin(), col.end()) - col.begin());
          }
          return b;
        };
        IndexSet chosen;
        double ms = 0.0;
        if (std::string_view(algorithm) == "ispasp") {
          prune::PruneParams params;
          params.s = s;
          params.iterations = cfg.iterations;
          params.batch_size = cfg.batch;
          params.resample = true;
          ms = time_ms([&] { chosen = prune::ispasp_prune(net, next_input, params).active; });
        } else {
          prune::GfsParams params;
          params.s = s;
          params.candidate_pool = std::string_view(algorithm) == "gfs" ? 0 : cfg.gfs_pool;
          params.seed = run_seed;
          ms = time_ms([&] { chosen = prune::gfs_prune(net, next_labeled, params); });
        }
        if (chosen.size() > s) throw std::logic_error("run_runtime: pruner returned more than s neurons");
        times.push_back(ms);
        res.runs.add_row({fmt(run_id++), std::to_string(kSchemaVersion), fmt(seed), algorithm, fmt(cfg.d_in),
                          fmt(cfg.d_hid), fmt(cfg.d_out), fmt(cfg.batch), fmt(frac), fmt(s), fmt(rep),
                          fmt(chosen.size()), fmt(ms)});
        if (opt.verbose) std::cerr << algorithm << " s=" << s << " rep=" << rep << " " << ms << " ms\n";
      }
      res.summary.add_row({std::to_string(kSchemaVersion), fmt(seed), algorithm, fmt(cfg.d_hid), fmt(frac), fmt(s),
                           fmt(cfg.repeats), fmt(median(times))});
    }
  }
  write_outputs(opt, {{"runtime_runs.csv", &res.runs}, {"runtime_summary.csv", &res.summary}});
  return res;
}

// ---------------------------------------------------------------- mnist

MnistConfig MnistConfig::from(ConfigReader& reader) {
  MnistConfig c;
  std::string data_dir, checkpoint;
  reader.read("data_dir", data_dir);
  reader.read("checkpoint", checkpoint);
  c.data_dir = data_dir;
  c.checkpoint = checkpoint;
  reader.read("d_hid", c.d_hid);
  reader.read("pretrain_epochs", c.pretrain_epochs);
  reader.read("pretrain_lr", c.pretrain_lr);
  reader.read("finetune_epochs", c.finetune_epochs);
  reader.read("finetune_lr", c.finetune_lr);
  reader.read("momentum", c.momentum);
  reader.read("train_batch", c.train_batch);
  reader.read("val_fraction", c.val_fraction);
  reader.read("s", c.s);
  reader.read("algorithms", c.algorithms);
  reader.read("trials", c.trials);
  reader.read("prune_batch", c.prune_batch);
  reader.read("prune_iterations", c.prune_iterations);
  reader.read("gfs_pool", c.gfs_pool);
  reader.read("seed", c.seed);
  reader.finish();
  c.validate();
  return c;
}

void MnistConfig::validate() const {
  if (d_hid == 0 || pretrain_epochs == 0 || train_batch == 0 || trials == 0 || prune_batch == 0 ||
      prune_iterations == 0) {
    throw ConfigError("mnist: sizes and counts must be >= 1");
  }
  if (!(pretrain_lr > 0.0 && finetune_lr > 0.0)) throw ConfigError("mnist: learning rates must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("mnist: momentum must lie in [0, 1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("mnist: val_fraction must lie in [0, 1)");
  if (s.empty()) throw ConfigError("mnist: s list must be non-empty");
  for (std::size_t v : s)
    if (v == 0 || v > d_hid) throw ConfigError("mnist: every s must lie in [1, d_hid]");
  for (const auto& a : algorithms)
    if (a != "ispasp" && a != "gfs" && a != "topk") throw ConfigError("mnist: unknown algorithm `" + a + "`");
}

namespace {

std::filesystem::path checkpoint_path(const MnistConfig& cfg, const RunOptions& opt, std::uint64_t seed) {
  if (!cfg.checkpoint.empty()) return cfg.checkpoint;
  const std::filesystem::path dir = opt.out_dir.empty() ? std::filesystem::path(".") : opt.out_dir;
  return dir / ("dense_h" + fmt(cfg.d_hid) + "_e" + fmt(cfg.pretrain_epochs) + "_lr" + fmt(cfg.pretrain_lr) +
                "_vf" + fmt(cfg.val_fraction) + "_seed" + fmt(seed) + ".ckpt");
}

struct MnistData {
  Dataset train;
  Dataset val;
  Dataset test;
};

MnistData load_split(const MnistConfig& cfg, std::uint64_t seed) {
  const auto dir = mnist::resolve_data_dir(cfg.data_dir);
  if (!dir) {
    throw std::runtime_error(std::string("mnist: no data directory; set data_dir or ") + mnist::kDataDirEnv);
  }
  mnist::MnistFiles files = mnist::load_mnist(*dir);
  auto [train, val] = mnist::make_splits(files.train, cfg.val_fraction, seed);
  return {std::move(train), std::move(val), std::move(files.test)};
}

TwoLayerNet train_dense(const MnistConfig& cfg, const Dataset& train, std::uint64_t seed, bool verbose) {
  TwoLayerNet net(synthetic::gen_gaussian_weight(cfg.d_hid, train.dim(), derive_seed(seed, "mnist/init/w0")),
                  synthetic::gen_gaussian_weight(10, cfg.d_hid, derive_seed(seed, "mnist/init/w1")));
  TrainConfig tc;
  tc.lr = cfg.pretrain_lr;
  tc.momentum = cfg.momentum;
  tc.epochs = cfg.pretrain_epochs;
  tc.batch_size = cfg.train_batch;
  tc.seed = derive_seed(seed, "mnist/pretrain");
  TrainResult r = sgd_train(std::move(net), train, tc);
  if (verbose) {
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
      std::cerr << "pretrain epoch " << e + 1 << " loss " << r.epoch_loss[e] << '\n';
  }
  return std::move(r.net);
}

}  // namespace

std::filesystem::path ensure_checkpoint(const MnistConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  const std::uint64_t seed = effective_seed(cfg.seed, opt);
  const auto path = checkpoint_path(cfg, opt, seed);
  if (std::filesystem::exists(path)) return path;
  const MnistData data = load_split(cfg, seed);
  const TwoLayerNet net = train_dense(cfg, data.train, seed, opt.verbose);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  save_checkpoint(path, layers_of(net));
  return path;
}

MnistResult run_mnist(const MnistConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  const std::uint64_t seed = effective_seed(cfg.seed, opt);
  const MnistData data = load_split(cfg, seed);

  const auto path = checkpoint_path(cfg, opt, seed);
  TwoLayerNet dense = [&] {
    if (std::filesystem::exists(path)) return two_layer_from(load_checkpoint(path));
    TwoLayerNet net = train_dense(cfg, data.train, seed, opt.verbose);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    save_checkpoint(path, layers_of(net));
    return net;
  }();
  if (dense.d_hid() != cfg.d_hid || dense.d_in() != data.train.dim() || dense.d_out() != 10) {
    throw ShapeError("mnist: checkpoint " + path.string() + " does not match d_hid=" + fmt(cfg.d_hid));
  }

  MnistResult res;
  res.dense_test_accuracy = accuracy(dense, data.test);

  struct Job {
    std::string algorithm;
    std::size_t s;
    std::size_t trial;
  };
  std::vector<Job> jobs;
  for (const auto& a : cfg.algorithms)
    for (std::size_t s : cfg.s)
      for (std::size_t t = 0; t < cfg.trials; ++t) jobs.push_back({a, s, t});

  struct Outcome {
    std::size_t selected = 0;
    double acc_before = 0.0;
    double acc_after = 0.0;
    double val_after = 0.0;
    double prune_ms = 0.0;
    double finetune_ms = 0.0;
  };
  std::vector<Outcome> outcomes(jobs.size());

#pragma omp parallel for schedule(dynamic) num_threads(worker_count(opt))
  for (std::ptrdiff_t ji = 0; ji < static_cast<std::ptrdiff_t>(jobs.size()); ++ji) {
    const Job& job = jobs[static_cast<std::size_t>(ji)];
    Outcome& o = outcomes[static_cast<std::size_t>(ji)];
    const std::uint64_t trial_seed = derive_seed(seed, "mnist/trial=" + fmt(job.trial));
    BatchSampler sampler(data.train, cfg.prune_batch, derive_seed(trial_seed, "prune/batches"));

    IndexSet keep;
    o.prune_ms = time_ms([&] {
      if (job.algorithm == "ispasp") {
        prune::PruneParams params;
        params.s = job.s;
        params.iterations = cfg.prune_iterations;
        params.batch_size = cfg.prune_batch;
        params.resample = true;
        params.seed = trial_seed;
        keep = prune::ispasp_prune(dense, [&] { return sampler.next_batch().features; }, params).active;
      } else if (job.algorithm == "gfs") {
        prune::GfsParams params;
        params.s = job.s;
        params.candidate_pool = cfg.gfs_pool;
        params.seed = trial_seed;
        keep = prune::gfs_prune(dense, [&] { return sampler.next_batch(); }, params);
      } else {
        keep = prune::topk_prune(dense, sampler.next_batch().features, job.s);
      }
    });
    o.selected = keep.size();
    TwoLayerNet pruned = extract_subnetwork(dense, keep);
    o.acc_before = accuracy(pruned, data.test);

    TrainConfig tc;
    tc.lr = cfg.finetune_lr;
    tc.momentum = cfg.momentum;
    tc.epochs = cfg.finetune_epochs;
    tc.batch_size = cfg.train_batch;
    tc.seed = derive_seed(trial_seed, "finetune");
    if (cfg.finetune_epochs > 0) {
      o.finetune_ms = time_ms([&] { pruned = fine_tune(std::move(pruned), data.train, tc).net; });
    }
    o.acc_after = accuracy(pruned, data.test);
    o.val_after = data.val.size() > 0 ? accuracy(pruned, data.val) : 0.0;
    if (opt.verbose) {
#pragma omp critical
      std::cerr << job.algorithm << " s=" << job.s << " trial=" << job.trial << " before " << o.acc_before
                << " after " << o.acc_after << '\n';
    }
  }

  res.runs.header = {"run_id", "schema_version", "seed", "algorithm", "s", "trial", "d_hid", "pretrain_epochs",
                     "finetune_epochs", "finetune_lr", "prune_batch", "prune_iterations", "normalization",
                     "selected", "dense_test_acc", "test_acc_before", "test_acc_after", "val_acc_after",
                     "prune_ms", "finetune_ms"};
  res.runs.timing = {"prune_ms", "finetune_ms"};
  std::map<std::pair<std::string, std::size_t>, std::pair<double, double>> sums;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Job& job = jobs[j];
    const Outcome& o = outcomes[j];
    res.runs.add_row({fmt(j), std::to_string(kSchemaVersion), fmt(seed), job.algorithm, fmt(job.s), fmt(job.trial),
                      fmt(cfg.d_hid), fmt(cfg.pretrain_epochs), fmt(cfg.finetune_epochs), fmt(cfg.finetune_lr),
                      fmt(cfg.prune_batch), fmt(cfg.prune_iterations), "minmax01+bias", fmt(o.selected),
                      fmt(res.dense_test_accuracy), fmt(o.acc_before), fmt(o.acc_after), fmt(o.val_after),
                      fmt(o.prune_ms), fmt(o.finetune_ms)});
    auto& acc = sums[{job.algorithm, job.s}];
    acc.first += o.acc_before;
    acc.second += o.acc_after;
  }
  res.summary.header = {"schema_version", "seed", "algorithm", "s", "trials", "mean_test_acc_before",
                        "mean_test_acc_after"};
  for (const auto& a : cfg.algorithms) {
    for (std::size_t s : cfg.s) {
      const auto& [before, after] = sums.at({a, s});
      const auto n = static_cast<double>(cfg.trials);
      res.summary.add_row({std::to_string(kSchemaVersion), fmt(seed), a, fmt(s), fmt(cfg.trials), fmt(before / n),
                           fmt(after / n)});
    }
  }
  write_outputs(opt, {{"mnist_runs.csv", &res.runs}, {"mnist_summary.csv", &res.summary}});
  return res;
}

}  // namespace ispasp::harness
