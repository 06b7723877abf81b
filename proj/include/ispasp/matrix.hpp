#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ispasp {

using Vector = std::vector<double>;

/// Raised when operand shapes do not conform.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an index, count or parameter lies outside its admissible range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Column-major dense matrix of doubles with at least one row and one column.
class DenseMatrix {
 public:
  DenseMatrix(std::size_t rows, std::size_t cols);
  DenseMatrix(std::size_t rows, std::size_t cols, double fill);

  /// Takes ownership of column-major `data`; throws on size mismatch or
  /// non-finite entries.
  static DenseMatrix from_column_major(std::size_t rows, std::size_t cols, std::vector<double> data);
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[c * rows_ + r]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[c * rows_ + r]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> col(std::size_t c) noexcept { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const noexcept { return {data_.data() + c * rows_, rows_}; }

  bool all_finite() const noexcept;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double scale) noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs);
DenseMatrix operator*(double scale, DenseMatrix m);

/// Sorted set of distinct indices drawn from [0, universe).
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::size_t universe) : universe_(universe) {}
  /// Sorts `indices`; throws RangeError on duplicates or indices >= universe.
  IndexSet(std::size_t universe, std::vector<std::size_t> indices);

  static IndexSet all(std::size_t universe);

  std::size_t universe() const noexcept { return universe_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  bool contains(std::size_t i) const noexcept;
  std::span<const std::size_t> indices() const noexcept { return indices_; }
  std::size_t operator[](std::size_t k) const noexcept { return indices_[k]; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }

  IndexSet unite(const IndexSet& other) const;
  std::size_t symmetric_difference_size(const IndexSet& other) const;
  bool is_subset_of(const IndexSet& other) const;

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::size_t universe_ = 0;
  std::vector<std::size_t> indices_;
};

std::string to_string(const IndexSet& set);

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ·b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
/// a·bᵀ
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
Vector matvec(const DenseMatrix& a, std::span<const double> x);
/// aᵀ·x
Vector matvec_t(const DenseMatrix& a, std::span<const double> x);
DenseMatrix transpose(const DenseMatrix& m);

/// Column sums: out[i] = Σ_j M(i, j).
Vector mu(const DenseMatrix& m);

/// Column-major stacking of all entries.
Vector vec_flatten(const DenseMatrix& m);

double norm_l1(std::span<const double> v) noexcept;
double norm_l2(std::span<const double> v) noexcept;
/// p must be 1 or 2.
double lp_norm(std::span<const double> v, int p);
double frobenius_norm(const DenseMatrix& m) noexcept;

/// Indices of the k largest entries by signed value, ties to the lowest index.
IndexSet top_k_by_value(std::span<const double> v, std::size_t k);
/// Same ordering on |v|.
IndexSet top_k_by_magnitude(std::span<const double> v, std::size_t k);

/// Same shape as `m`; rows outside `rows` are zeroed.
DenseMatrix row_restrict(const DenseMatrix& m, const IndexSet& rows);
/// v with entries outside `keep` zeroed.
Vector restrict_vector(std::span<const double> v, const IndexSet& keep);

/// Compacted |S| x cols submatrix.
DenseMatrix gather_rows(const DenseMatrix& m, const IndexSet& rows);
/// Compacted rows x |S| submatrix.
DenseMatrix gather_cols(const DenseMatrix& m, const IndexSet& cols);
DenseMatrix gather_cols(const DenseMatrix& m, std::span<const std::size_t> cols);

/// Rows holding at least one nonzero entry.
IndexSet row_support(const DenseMatrix& m);

/// Smallest R with |mu(M)|_(i) <= R / i^(1/p) for every i (1-based, sorted
/// descending by magnitude). Requires nonnegative M and 0 < p < 1.
double compressibility_magnitude(const DenseMatrix& m, double p);

}  // namespace ispasp
