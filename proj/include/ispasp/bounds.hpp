#pragma once

// Evaluators for the i-SpaSP error bounds and the quantities they depend on:
// the best s-row-sparse split of H, restricted isometry constants, and the
// per-iteration / unrolled residual bounds for two-layer and multi-layer
// pruning. Big-O expressions are evaluated with their written constants and
// a unit implicit constant.

#include <cstdint>
#include <span>
#include <vector>

#include "ispasp/matrix.hpp"

namespace ispasp::bounds {

/// H = sparse + noise with `sparse` keeping the s rows of largest mu(H).
struct SparseSplit {
  DenseMatrix sparse;  // Z
  DenseMatrix noise;   // E
  IndexSet support;    // rows of Z
};

SparseSplit best_s_row_sparse(const DenseMatrix& h, std::size_t s);

enum class RipMode { Exact, Sampled };

struct RipEstimate {
  std::size_t r = 0;
  double delta = 0.0;
  RipMode mode = RipMode::Exact;
  std::size_t samples = 0;  // supports examined
};

/// Largest number of supports exact mode will enumerate.
inline constexpr std::uint64_t kExactSupportLimit = 200'000;

/// Restricted isometry constant of order r over column supports of W.
/// Exact mode enumerates every r-subset; sampled mode takes the max over
/// `samples` seeded random subsets and is therefore a lower bound.
RipEstimate rip_constant(const DenseMatrix& w, std::size_t r, RipMode mode, std::size_t samples = 0,
                         std::uint64_t seed = 0);

/// max(1 - λmin, λmax - 1) over the full Gram matrix WᵀW. Since δ_r is
/// nondecreasing in r this certifies δ_r <= value for every r <= cols(W).
double rip_certified_upper(const DenseMatrix& w);

struct EigenRange {
  double min = 0.0;
  double max = 0.0;
};

/// Extreme eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// iterated until the off-diagonal Frobenius mass falls below tol times the
/// total mass.
EigenRange symmetric_extreme_eigenvalues(const DenseMatrix& sym, double tol = 1e-10);

/// (0.444)^t ||mu(H)||_2 + (14 + 7/sqrt(s)) ||mu(E)||_1
double lemma_hidden_residual_bound(const DenseMatrix& h, const DenseMatrix& noise, std::size_t s, std::size_t t);
double lemma_hidden_residual_bound(double mu_h_l2, double mu_e_l1, std::size_t s, std::size_t t);

/// 0.444 prev + 7.333 ||mu(Ê)||_2 + (3.456/sqrt(s)) ||mu(Ê)||_1
double recursion_step_bound(double prev_residual_norm, const DenseMatrix& noise_hat, std::size_t s);
double recursion_step_bound(double prev_residual_norm, std::span<const double> mu_noise_hat, std::size_t s);

/// ||w1||_F times lemma_hidden_residual_bound.
double theorem_output_bound(const DenseMatrix& w1, const DenseMatrix& h, const DenseMatrix& noise, std::size_t s,
                            std::size_t t);

/// R s^(1 - 1/p) / (1/p - 1)
double lemma_noise_bound(double magnitude, double p, std::size_t s);

/// Exponent of s in the large-t output residual bound: 1 - 1/p.
double theorem_final_rate(double p);

/// Sum over i = 1..L of
///   (14 + 7/sqrt(s))^(L-i+1) * ||W_L||_F * prod_{j=1}^{L-i} ||vec(W_j)||_1
///   * d^((L-i)/2) s^(1-1/p) / (1/p - 1).
/// `l1_vec_w` holds ||vec(W_j)||_1 for j = 1..L-1 (length L-1).
double theorem_multilayer_bound(std::size_t layers, double d, double s, double p, double frob_w_last,
                                std::span<const double> l1_vec_w);

/// Per-layer decay exponents of the multi-layer bound with d a fixed
/// multiple of s, ordered first to last layer; e.g. p = 1/4, L = 3 gives
/// (-1.5, -2, -2.5).
std::vector<double> multilayer_layer_exponents(std::size_t layers, double p);

}  // namespace ispasp::bounds
