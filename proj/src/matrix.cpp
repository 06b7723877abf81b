#include "ispasp/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ispasp/kernels.hpp"

namespace ispasp {

namespace {

void require_nonempty(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw ShapeError("DenseMatrix requires at least one row and one column");
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
    throw ShapeError(os.str());
  }
}

// Ordering used by every top-k selection: larger key first, then lower index.
template <typename Key>
IndexSet top_k_impl(std::span<const double> v, std::size_t k, Key key) {
  if (k == 0 || k > v.size()) {
    throw RangeError("top-k: k=" + std::to_string(k) + " outside [1, " + std::to_string(v.size()) + "]");
  }
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    const double ka = key(v[a]);
    const double kb = key(v[b]);
    if (ka != kb) return ka > kb;
    return a < b;
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), before);
  order.resize(k);
  return IndexSet(v.size(), std::move(order));
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols) : DenseMatrix(rows, cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols) {
  require_nonempty(rows, cols);
  if (!std::isfinite(fill)) throw RangeError("DenseMatrix fill value must be finite");
  data_.assign(rows * cols, fill);
}

DenseMatrix DenseMatrix::from_column_major(std::size_t rows, std::size_t cols, std::vector<double> data) {
  require_nonempty(rows, cols);
  if (data.size() != rows * cols) throw ShapeError("from_column_major: data length does not equal rows*cols");
  DenseMatrix m(rows, cols);
  m.data_ = std::move(data);
  if (!m.all_finite()) throw RangeError("from_column_major: non-finite entry");
  return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  DenseMatrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  if (!m.all_finite()) throw RangeError("from_rows: non-finite entry");
  return m;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseMatrix& DenseMatrix::operator*=(double scale) noexcept {
  for (double& v : data_) v *= scale;
  return *this;
}

DenseMatrix operator+(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs += rhs; }
DenseMatrix operator-(DenseMatrix lhs, const DenseMatrix& rhs) { return lhs -= rhs; }
DenseMatrix operator*(double scale, DenseMatrix m) { return m *= scale; }

IndexSet::IndexSet(std::size_t universe, std::vector<std::size_t> indices)
    : universe_(universe), indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end()) {
    throw RangeError("IndexSet: duplicate index");
  }
  if (!indices_.empty() && indices_.back() >= universe_) {
    throw RangeError("IndexSet: index " + std::to_string(indices_.back()) + " >= universe " +
                     std::to_string(universe_));
  }
}

IndexSet IndexSet::all(std::size_t universe) {
  std::vector<std::size_t> idx(universe);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return IndexSet(universe, std::move(idx));
}

bool IndexSet::contains(std::size_t i) const noexcept {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

IndexSet IndexSet::unite(const IndexSet& other) const {
  if (other.universe_ != universe_) throw RangeError("IndexSet::unite: universe mismatch");
  std::vector<std::size_t> out;
  out.reserve(indices_.size() + other.indices_.size());
  std::set_union(indices_.begin(), indices_.end(), other.indices_.begin(), other.indices_.end(),
                 std::back_inserter(out));
  IndexSet r(universe_);
  r.indices_ = std::move(out);
  return r;
}

std::size_t IndexSet::symmetric_difference_size(const IndexSet& other) const {
  std::vector<std::size_t> out;
  std::set_symmetric_difference(indices_.begin(), indices_.end(), other.indices_.begin(), other.indices_.end(),
                                std::back_inserter(out));
  return out.size();
}

bool IndexSet::is_subset_of(const IndexSet& other) const {
  return std::includes(other.indices_.begin(), other.indices_.end(), indices_.begin(), indices_.end());
}

std::string to_string(const IndexSet& set) {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < set.size(); ++k) os << (k ? "," : "") << set[k];
  os << '}';
  return os.str();
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " * " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  DenseMatrix c(a.rows(), b.cols());
  kernels::parallel::gemm(a.rows(), b.cols(), a.cols(), a.data().data(), b.data().data(), c.data().data());
  return c;
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  kernels::parallel::transpose(m.rows(), m.cols(), m.data().data(), t.data().data());
  return t;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  return matmul(transpose(a), b);
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
  return matmul(a, transpose(b));
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: size mismatch");
  Vector out(a.rows(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const auto col = a.col(j);
    const double xj = x[j];
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] += col[i] * xj;
  }
  return out;
}

Vector matvec_t(const DenseMatrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw ShapeError("matvec_t: size mismatch");
  Vector out(a.cols(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const auto col = a.col(j);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) acc += col[i] * x[i];
    out[j] = acc;
  }
  return out;
}

Vector mu(const DenseMatrix& m) {
  Vector out(m.rows());
  kernels::parallel::column_sums(m.rows(), m.cols(), m.data().data(), out.data());
  return out;
}

Vector vec_flatten(const DenseMatrix& m) { return Vector(m.data().begin(), m.data().end()); }

double norm_l1(std::span<const double> v) noexcept {
  double acc = 0.0;
  for (double x : v) acc += std::abs(x);
  return acc;
}

double norm_l2(std::span<const double> v) noexcept {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double lp_norm(std::span<const double> v, int p) {
  if (p == 1) return norm_l1(v);
  if (p == 2) return norm_l2(v);
  throw RangeError("lp_norm: only p = 1 and p = 2 are supported");
}

double frobenius_norm(const DenseMatrix& m) noexcept { return norm_l2(m.data()); }

IndexSet top_k_by_value(std::span<const double> v, std::size_t k) {
  return top_k_impl(v, k, [](double x) { return x; });
}

IndexSet top_k_by_magnitude(std::span<const double> v, std::size_t k) {
  return top_k_impl(v, k, [](double x) { return std::abs(x); });
}

DenseMatrix row_restrict(const DenseMatrix& m, const IndexSet& rows) {
  if (!rows.empty() && rows.indices().back() >= m.rows()) throw RangeError("row_restrict: index out of range");
  DenseMatrix out(m.rows(), m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto src = m.col(c);
    auto dst = out.col(c);
    for (std::size_t r : rows) dst[r] = src[r];
  }
  return out;
}

Vector restrict_vector(std::span<const double> v, const IndexSet& keep) {
  if (!keep.empty() && keep.indices().back() >= v.size()) throw RangeError("restrict_vector: index out of range");
  Vector out(v.size(), 0.0);
  for (std::size_t i : keep) out[i] = v[i];
  return out;
}

DenseMatrix gather_rows(const DenseMatrix& m, const IndexSet& rows) {
  if (rows.empty()) throw RangeError("gather_rows: empty index set");
  if (rows.indices().back() >= m.rows()) throw RangeError("gather_rows: index out of range");
  DenseMatrix out(rows.size(), m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto src = m.col(c);
    auto dst = out.col(c);
    for (std::size_t k = 0; k < rows.size(); ++k) dst[k] = src[rows[k]];
  }
  return out;
}

DenseMatrix gather_cols(const DenseMatrix& m, std::span<const std::size_t> cols) {
  if (cols.empty()) throw RangeError("gather_cols: empty index list");
  DenseMatrix out(m.rows(), cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] >= m.cols()) throw RangeError("gather_cols: index out of range");
    std::copy_n(m.col(cols[k]).begin(), m.rows(), out.col(k).begin());
  }
  return out;
}

DenseMatrix gather_cols(const DenseMatrix& m, const IndexSet& cols) { return gather_cols(m, cols.indices()); }

IndexSet row_support(const DenseMatrix& m) {
  std::vector<char> nonzero(m.rows(), 0);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto col = m.col(c);
    for (std::size_t r = 0; r < m.rows(); ++r)
      if (std::abs(col[r]) > 0.0) nonzero[r] = 1;
  }
  std::vector<std::size_t> idx;
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (nonzero[r]) idx.push_back(r);
  return IndexSet(m.rows(), std::move(idx));
}

double compressibility_magnitude(const DenseMatrix& m, double p) {
  if (!(p > 0.0 && p < 1.0)) throw RangeError("compressibility_magnitude: p must lie in (0, 1)");
  if (std::any_of(m.data().begin(), m.data().end(), [](double v) { return v < 0.0; })) {
    throw RangeError("compressibility_magnitude: matrix has negative entries");
  }
  Vector sums = mu(m);
  for (double& v : sums) v = std::abs(v);
  std::vector<std::size_t> order(sums.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sums[a] > sums[b]; });
  double r = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    r = std::max(r, sums[order[k]] * std::pow(static_cast<double>(k + 1), 1.0 / p));
  }
  return r;
}

}  // namespace ispasp
