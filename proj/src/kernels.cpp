#include "ispasp/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ispasp::kernels {

namespace {

constexpr std::size_t kRowTile = 16;
constexpr std::size_t kColTile = 6;
constexpr std::size_t kDepthBlock = 256;
constexpr std::size_t kRowBlock = 256;

using v8 = double __attribute__((vector_size(64)));

inline v8 load8(const double* p) {
  v8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, v8 v) { std::memcpy(p, &v, sizeof v); }

// Copies a[i0:i1, p0:p1] into 16-row panels, panel-major then depth-major,
// zero-padding the last panel.
void pack_a(const double* a, std::size_t lda, std::size_t i0, std::size_t i1, std::size_t p0, std::size_t p1,
            double* out) {
  const std::size_t depth = p1 - p0;
  for (std::size_t ip = i0; ip < i1; ip += kRowTile) {
    const std::size_t mr = std::min(kRowTile, i1 - ip);
    double* panel = out + ((ip - i0) / kRowTile) * depth * kRowTile;
    for (std::size_t p = 0; p < depth; ++p) {
      const double* src = a + (p0 + p) * lda + ip;
      double* dst = panel + p * kRowTile;
      std::size_t i = 0;
      for (; i < mr; ++i) dst[i] = src[i];
      for (; i < kRowTile; ++i) dst[i] = 0.0;
    }
  }
}

// c[0:mr, 0:NR] += panel * b[p0:p1, 0:NR]; the panel holds 16 rows per depth step.
template <std::size_t NR>
inline void micro_tile(std::size_t depth, const double* panel, const double* b, std::size_t ldb, double* c,
                       std::size_t ldc, std::size_t mr) {
  v8 lo[NR], hi[NR];
  for (std::size_t j = 0; j < NR; ++j) lo[j] = hi[j] = v8{};
  for (std::size_t p = 0; p < depth; ++p) {
    const v8 a_lo = load8(panel + p * kRowTile);
    const v8 a_hi = load8(panel + p * kRowTile + 8);
    for (std::size_t j = 0; j < NR; ++j) {
      const double bv = b[j * ldb + p];
      lo[j] += a_lo * bv;
      hi[j] += a_hi * bv;
    }
  }
  for (std::size_t j = 0; j < NR; ++j) {
    double* cj = c + j * ldc;
    if (mr == kRowTile) {
      store8(cj, load8(cj) + lo[j]);
      store8(cj + 8, load8(cj + 8) + hi[j]);
    } else {
      double tmp[kRowTile];
      store8(tmp, lo[j]);
      store8(tmp + 8, hi[j]);
      for (std::size_t i = 0; i < mr; ++i) cj[i] += tmp[i];
    }
  }
}

using TileFn = void (*)(std::size_t, const double*, const double*, std::size_t, double*, std::size_t, std::size_t);
constexpr TileFn kTiles[kColTile + 1] = {nullptr,        micro_tile<1>, micro_tile<2>, micro_tile<3>,
                                         micro_tile<4>, micro_tile<5>, micro_tile<6>};

}  // namespace

namespace parallel {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  std::fill(c, c + m * n, 0.0);
  if (k == 0) return;
  const std::size_t col_panels = (n + kColTile - 1) / kColTile;
  std::vector<double> packed(((std::min(m, kRowBlock) + kRowTile - 1) / kRowTile) * kRowTile * kDepthBlock);
  for (std::size_t p0 = 0; p0 < k; p0 += kDepthBlock) {
    const std::size_t p1 = std::min(k, p0 + kDepthBlock);
    for (std::size_t i0 = 0; i0 < m; i0 += kRowBlock) {
      const std::size_t i1 = std::min(m, i0 + kRowBlock);
      pack_a(a, m, i0, i1, p0, p1, packed.data());
      const double* pa = packed.data();
      // Each c entry belongs to one column panel, hence one thread; the
      // depth order is fixed so results do not depend on the thread count.
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t jp = 0; jp < static_cast<std::ptrdiff_t>(col_panels); ++jp) {
        const std::size_t j0 = static_cast<std::size_t>(jp) * kColTile;
        const std::size_t nr = std::min(kColTile, n - j0);
        for (std::size_t ip = i0; ip < i1; ip += kRowTile) {
          const double* panel = pa + ((ip - i0) / kRowTile) * (p1 - p0) * kRowTile;
          kTiles[nr](p1 - p0, panel, b + j0 * k + p0, k, c + j0 * m + ip, m, std::min(kRowTile, i1 - ip));
        }
      }
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out) {
  constexpr std::size_t block = 32;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t cb = 0; cb < static_cast<std::ptrdiff_t>(cols); cb += block) {
    const std::size_t c0 = static_cast<std::size_t>(cb);
    const std::size_t c1 = std::min(cols, c0 + block);
    for (std::size_t r0 = 0; r0 < rows; r0 += block) {
      const std::size_t r1 = std::min(rows, r0 + block);
      for (std::size_t c = c0; c < c1; ++c)
        for (std::size_t r = r0; r < r1; ++r) out[r * cols + c] = in[c * rows + r];
    }
  }
}

void column_sums(std::size_t rows, std::size_t cols, const double* m, double* out) {
  // Parallel over rows so every output entry keeps the serial column order.
  constexpr std::size_t block = 64;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t rb = 0; rb < static_cast<std::ptrdiff_t>(rows); rb += block) {
    const std::size_t r0 = static_cast<std::size_t>(rb);
    const std::size_t r1 = std::min(rows, r0 + block);
    for (std::size_t r = r0; r < r1; ++r) out[r] = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double* col = m + c * rows;
      for (std::size_t r = r0; r < r1; ++r) out[r] += col[r];
    }
  }
}

void relu(std::span<double> x) {
  double* p = x.data();
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
}

}  // namespace parallel

namespace serial {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
      c[j * m + i] = acc;
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, const double* in, double* out) {
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = in[c * rows + r];
}

void column_sums(std::size_t rows, std::size_t cols, const double* m, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += m[c * rows + r];
    out[r] = acc;
  }
}

void relu(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

}  // namespace serial

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) noexcept {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace ispasp::kernels
