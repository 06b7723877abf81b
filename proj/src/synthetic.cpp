#include "ispasp/synthetic.hpp"

#include <cmath>

#include "ispasp/prng.hpp"

namespace ispasp::synthetic {

void CompressibleSpec::validate() const {
  if (d_hid == 0 || batch == 0) throw RangeError("CompressibleSpec: d_hid and batch must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw RangeError("CompressibleSpec: p must lie in (0, 1)");
  if (!(magnitude > 0.0) || !std::isfinite(magnitude)) throw RangeError("CompressibleSpec: R must be positive");
}

namespace {

// Row sum in the same order mu() uses (column by column).
double row_sum(const DenseMatrix& m, std::size_t r) {
  double acc = 0.0;
  for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c);
  return acc;
}

}  // namespace

DenseMatrix gen_compressible(const CompressibleSpec& spec) {
  spec.validate();
  Prng values = Prng::stream(spec.seed, "compressible/values");
  Prng order = Prng::stream(spec.seed, "compressible/shuffle");

  const double inv_p = 1.0 / spec.p;
  DenseMatrix sorted(spec.d_hid, spec.batch);
  for (std::size_t j = 0; j < spec.d_hid; ++j) {
    const double scale = std::pow(static_cast<double>(j + 1), inv_p);
    const double budget = spec.magnitude / scale;
    double remaining = budget;
    for (std::size_t k = 0; k < spec.batch; ++k) {
      const double cap = remaining / static_cast<double>(spec.batch - k);
      const double v = values.uniform() * cap;
      sorted(j, k) = v;
      remaining = std::max(0.0, remaining - v);
    }
    // Round-off guard so the defining inequality holds in floating point.
    while (row_sum(sorted, j) * scale > spec.magnitude) {
      for (std::size_t k = 0; k < spec.batch; ++k) sorted(j, k) *= 1.0 - 1e-12;
    }
  }

  const auto perm = order.permutation(spec.d_hid);
  DenseMatrix out(spec.d_hid, spec.batch);
  for (std::size_t c = 0; c < spec.batch; ++c)
    for (std::size_t r = 0; r < spec.d_hid; ++r) out(perm[r], c) = sorted(r, c);
  return out;
}

DenseMatrix gen_standard_normal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Prng rng = Prng::stream(seed, "gaussian");
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

DenseMatrix gen_gaussian_weight(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  DenseMatrix m = gen_standard_normal(rows, cols, seed);
  m *= std::sqrt(2.0 / static_cast<double>(cols));
  return m;
}

DenseMatrix gen_gaussian_rip(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  DenseMatrix m = gen_standard_normal(rows, cols, seed);
  m *= 1.0 / std::sqrt(static_cast<double>(rows));
  return m;
}

DenseMatrix gen_exact_row_sparse(std::size_t d_hid, std::size_t batch, std::size_t s, std::uint64_t seed) {
  if (s == 0 || s > d_hid) throw RangeError("gen_exact_row_sparse: s must lie in [1, d_hid]");
  Prng pick = Prng::stream(seed, "row-sparse/support");
  Prng values = Prng::stream(seed, "row-sparse/values");
  const auto rows = pick.sample_without_replacement(d_hid, s);
  DenseMatrix m(d_hid, batch);
  for (std::size_t c = 0; c < batch; ++c) {
    for (std::size_t r : rows) m(r, c) = 1.0 - values.uniform();  // (0, 1]
  }
  return m;
}

}  // namespace ispasp::synthetic
