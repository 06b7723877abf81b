#pragma once

#include <cstdint>

#include "ispasp/matrix.hpp"

namespace ispasp::synthetic {

/// Shape and decay parameters of a p-row-compressible hidden representation.
struct CompressibleSpec {
  std::size_t d_hid = 100;
  std::size_t batch = 100;
  double p = 0.5;
  double magnitude = 1.0;  // R
  std::uint64_t seed = 0;

  void validate() const;
};

/// Nonnegative d_hid x batch matrix whose sorted row sums obey
/// sum_(i) <= R / i^(1/p).
///
/// Row j (1-based, before shuffling) receives budget R / j^(1/p); its
/// entries are drawn left to right, entry k uniform on
/// [0, remaining / (batch - k)], where `remaining` is the unspent budget.
/// Any row whose floating-point sum would overshoot the cap is scaled down
/// until the cap holds exactly. Rows are then permuted by a seeded shuffle.
DenseMatrix gen_compressible(const CompressibleSpec& spec);

/// Kaiming-normal weights: N(0, 2 / cols) entries.
DenseMatrix gen_gaussian_weight(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// N(0, 1 / rows) entries; the column scaling under which Gaussian matrices
/// satisfy the restricted isometry property with high probability.
DenseMatrix gen_gaussian_rip(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Exactly s uniformly chosen nonzero rows with entries uniform on (0, 1].
DenseMatrix gen_exact_row_sparse(std::size_t d_hid, std::size_t batch, std::size_t s, std::uint64_t seed);

/// i.i.d. N(0, 1) entries.
DenseMatrix gen_standard_normal(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace ispasp::synthetic
