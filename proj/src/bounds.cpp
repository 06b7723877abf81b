#include "ispasp/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ispasp/prng.hpp"

namespace ispasp::bounds {

namespace {

constexpr double kContraction = 0.444;
constexpr double kStepE2 = 7.333;
constexpr double kStepE1 = 3.456;

double noise_coefficient(std::size_t s) { return 14.0 + 7.0 / std::sqrt(static_cast<double>(s)); }

void require_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw RangeError("p must lie in (0, 1)");
}

double delta_of_gram(const DenseMatrix& gram, std::span<const std::size_t> support) {
  const std::size_t r = support.size();
  DenseMatrix sub(r, r);
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t i = 0; i < r; ++i) sub(i, j) = gram(support[i], support[j]);
  const EigenRange e = symmetric_extreme_eigenvalues(sub);
  return std::max(1.0 - e.min, e.max - 1.0);
}

std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t k, std::uint64_t cap) {
  k = std::min(k, n - k);
  std::uint64_t c = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;
    if (c > cap) return cap + 1;
  }
  return c;
}

}  // namespace

SparseSplit best_s_row_sparse(const DenseMatrix& h, std::size_t s) {
  if (s == 0 || s > h.rows()) throw RangeError("best_s_row_sparse: s outside [1, rows(H)]");
  const IndexSet support = top_k_by_magnitude(mu(h), s);
  DenseMatrix z = row_restrict(h, support);
  DenseMatrix e = h - z;
  return SparseSplit{std::move(z), std::move(e), support};
}

EigenRange symmetric_extreme_eigenvalues(const DenseMatrix& sym, double tol) {
  const std::size_t n = sym.rows();
  if (sym.cols() != n) throw ShapeError("symmetric_extreme_eigenvalues: matrix is not square");
  DenseMatrix a = sym;
  const double total = frobenius_norm(a);
  auto off_mass = [&] {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        if (i != j) acc += a(i, j) * a(i, j);
    return std::sqrt(acc);
  };
  for (int sweep = 0; sweep < 100 && off_mass() > tol * std::max(total, 1e-300); ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
      }
    }
  }
  EigenRange out{a(0, 0), a(0, 0)};
  for (std::size_t i = 1; i < n; ++i) {
    out.min = std::min(out.min, a(i, i));
    out.max = std::max(out.max, a(i, i));
  }
  return out;
}

RipEstimate rip_constant(const DenseMatrix& w, std::size_t r, RipMode mode, std::size_t samples,
                         std::uint64_t seed) {
  const std::size_t n = w.cols();
  if (r == 0 || r > n) throw RangeError("rip_constant: r outside [1, cols(W)]");
  const DenseMatrix gram = matmul_tn(w, w);
  RipEstimate est{r, 0.0, mode, 0};

  if (mode == RipMode::Exact) {
    if (binomial_capped(n, r, kExactSupportLimit) > kExactSupportLimit) {
      throw RangeError("rip_constant: exact mode would enumerate more than 200000 supports");
    }
    std::vector<std::size_t> support(r);
    std::iota(support.begin(), support.end(), std::size_t{0});
    while (true) {
      est.delta = std::max(est.delta, delta_of_gram(gram, support));
      ++est.samples;
      // Next r-combination in lexicographic order.
      std::size_t i = r;
      while (i > 0 && support[i - 1] == n - r + i - 1) --i;
      if (i == 0) break;
      ++support[i - 1];
      for (std::size_t j = i; j < r; ++j) support[j] = support[j - 1] + 1;
    }
    return est;
  }

  if (samples == 0) throw RangeError("rip_constant: sampled mode needs samples >= 1");
  Prng rng = Prng::stream(seed, "rip/supports");
  std::vector<std::vector<std::size_t>> supports;
  supports.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) supports.push_back(rng.sample_without_replacement(n, r));
  std::vector<double> deltas(samples);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(samples); ++k) {
    deltas[static_cast<std::size_t>(k)] = delta_of_gram(gram, supports[static_cast<std::size_t>(k)]);
  }
  est.delta = *std::max_element(deltas.begin(), deltas.end());
  est.samples = samples;
  return est;
}

double rip_certified_upper(const DenseMatrix& w) {
  const EigenRange e = symmetric_extreme_eigenvalues(matmul_tn(w, w));
  return std::max(1.0 - e.min, e.max - 1.0);
}

double lemma_hidden_residual_bound(double mu_h_l2, double mu_e_l1, std::size_t s, std::size_t t) {
  if (s == 0) throw RangeError("lemma_hidden_residual_bound: s must be >= 1");
  return std::pow(kContraction, static_cast<double>(t)) * mu_h_l2 + noise_coefficient(s) * mu_e_l1;
}

double lemma_hidden_residual_bound(const DenseMatrix& h, const DenseMatrix& noise, std::size_t s, std::size_t t) {
  return lemma_hidden_residual_bound(norm_l2(mu(h)), norm_l1(mu(noise)), s, t);
}

double recursion_step_bound(double prev_residual_norm, std::span<const double> mu_noise_hat, std::size_t s) {
  if (s == 0) throw RangeError("recursion_step_bound: s must be >= 1");
  return kContraction * prev_residual_norm + kStepE2 * norm_l2(mu_noise_hat) +
         kStepE1 / std::sqrt(static_cast<double>(s)) * norm_l1(mu_noise_hat);
}

double recursion_step_bound(double prev_residual_norm, const DenseMatrix& noise_hat, std::size_t s) {
  return recursion_step_bound(prev_residual_norm, mu(noise_hat), s);
}

double theorem_output_bound(const DenseMatrix& w1, const DenseMatrix& h, const DenseMatrix& noise, std::size_t s,
                            std::size_t t) {
  return frobenius_norm(w1) * lemma_hidden_residual_bound(h, noise, s, t);
}

double lemma_noise_bound(double magnitude, double p, std::size_t s) {
  require_p(p);
  if (s == 0) throw RangeError("lemma_noise_bound: s must be >= 1");
  if (!(magnitude > 0.0)) throw RangeError("lemma_noise_bound: R must be positive");
  return magnitude * std::pow(static_cast<double>(s), 1.0 - 1.0 / p) / (1.0 / p - 1.0);
}

double theorem_final_rate(double p) {
  require_p(p);
  // (p - 1) / p is the correctly rounded 1 - 1/p for the dyadic p of interest.
  return (p - 1.0) / p;
}

double theorem_multilayer_bound(std::size_t layers, double d, double s, double p, double frob_w_last,
                                std::span<const double> l1_vec_w) {
  require_p(p);
  if (layers == 0) throw RangeError("theorem_multilayer_bound: L must be >= 1");
  if (l1_vec_w.size() + 1 != layers) {
    throw RangeError("theorem_multilayer_bound: expected L-1 = " + std::to_string(layers - 1) + " weight norms");
  }
  if (!(d > 0.0 && s > 0.0 && frob_w_last >= 0.0)) throw RangeError("theorem_multilayer_bound: bad inputs");
  const double coeff = 14.0 + 7.0 / std::sqrt(s);
  const double decay = std::pow(s, 1.0 - 1.0 / p) / (1.0 / p - 1.0);
  const auto big_l = static_cast<double>(layers);
  double total = 0.0;
  for (std::size_t i = 1; i <= layers; ++i) {
    double weight_product = frob_w_last;
    for (std::size_t j = 1; j <= layers - i; ++j) weight_product *= l1_vec_w[j - 1];
    const auto depth = big_l - static_cast<double>(i);
    total += std::pow(coeff, depth + 1.0) * weight_product * std::pow(d, depth / 2.0) * decay;
  }
  return total;
}

std::vector<double> multilayer_layer_exponents(std::size_t layers, double p) {
  const double base = theorem_final_rate(p);
  std::vector<double> out;
  out.reserve(layers);
  for (std::size_t i = 1; i <= layers; ++i) out.push_back(static_cast<double>(layers - i + 1) / 2.0 + base);
  return out;
}

}  // namespace ispasp::bounds
