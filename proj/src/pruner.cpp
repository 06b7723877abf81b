#include "ispasp/pruner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ispasp/prng.hpp"

namespace ispasp::prune {

void PruneParams::validate(std::size_t d_hid) const {
  if (s == 0 || s > d_hid) {
    std::ostringstream os;
    os << "PruneParams: s=" << s << " outside [1, " << d_hid << "]";
    throw RangeError(os.str());
  }
  if (iterations == 0) throw RangeError("PruneParams: iterations must be >= 1");
  if (batch_size == 0) throw RangeError("PruneParams: batch_size must be >= 1");
}

DenseMatrix importance(const DenseMatrix& w1, const DenseMatrix& residual) {
  if (w1.rows() != residual.rows()) throw ShapeError("importance: w1 and residual row counts differ");
  return matmul_tn(w1, residual);
}

double reconstruction_loss(const DenseMatrix& w1, const DenseMatrix& h, const DenseMatrix& u_prime) {
  const DenseMatrix diff = matmul(w1, h) - u_prime;
  const double f = frobenius_norm(diff);
  return 0.5 * f * f;
}

DenseMatrix importance_fd(const DenseMatrix& w1, const DenseMatrix& h, const DenseMatrix& u_prime, double step) {
  DenseMatrix grad(h.rows(), h.cols());
  DenseMatrix probe = h;
  for (std::size_t j = 0; j < h.cols(); ++j) {
    for (std::size_t i = 0; i < h.rows(); ++i) {
      const double orig = probe(i, j);
      probe(i, j) = orig + step;
      const double up = reconstruction_loss(w1, probe, u_prime);
      probe(i, j) = orig - step;
      const double down = reconstruction_loss(w1, probe, u_prime);
      probe(i, j) = orig;
      grad(i, j) = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

DenseMatrix residual_for(const DenseMatrix& w1, const DenseMatrix& h, const DenseMatrix& dense_out,
                         const IndexSet& active) {
  if (active.empty()) return dense_out;
  return dense_out - matmul(gather_cols(w1, active), gather_rows(h, active));
}

PruneState init_state(const DenseMatrix& w1, const DenseMatrix& h) {
  if (w1.cols() != h.rows()) throw ShapeError("init_state: w1 columns must equal hidden rows");
  DenseMatrix u = matmul(w1, h);
  return PruneState{IndexSet(h.rows()), 0, u, u, mu(h)};
}

void rebase_state(PruneState& state, const DenseMatrix& w1, const DenseMatrix& h) {
  if (w1.cols() != h.rows()) throw ShapeError("rebase_state: w1 columns must equal hidden rows");
  state.dense_out = matmul(w1, h);
  state.h_sums = mu(h);
  state.residual = residual_for(w1, h, state.dense_out, state.active);
}

namespace {

// Keeps entries of `chosen` whose value in `v` is nonzero (the support of a
// thresholded vector).
IndexSet nonzero_part(const IndexSet& chosen, std::span<const double> v) {
  std::vector<std::size_t> keep;
  keep.reserve(chosen.size());
  for (std::size_t i : chosen)
    if (v[i] != 0.0) keep.push_back(i);
  return IndexSet(chosen.universe(), std::move(keep));
}

// Largest-s entries of v among `pool`, ordered by value then lowest index.
IndexSet top_s_within(std::span<const double> v, const IndexSet& pool, std::size_t s) {
  std::vector<std::size_t> cand(pool.begin(), pool.end());
  if (cand.size() > s) {
    std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(s - 1), cand.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] != v[b] ? v[a] > v[b] : a < b; });
    cand.resize(s);
  }
  return IndexSet(pool.universe(), std::move(cand));
}

double hidden_residual_norm(std::span<const double> h_sums, const IndexSet& active) {
  double acc = 0.0;
  for (std::size_t i = 0; i < h_sums.size(); ++i)
    if (!active.contains(i)) acc += h_sums[i] * h_sums[i];
  return std::sqrt(acc);
}

}  // namespace

PruneState ispasp_step(PruneState state, const DenseMatrix& w1, const DenseMatrix& h, std::size_t s,
                       SelectionPolicy policy) {
  const std::size_t d_hid = h.rows();
  if (s == 0 || s > d_hid) throw RangeError("ispasp_step: s outside [1, d_hid]");
  if (w1.cols() != d_hid || state.residual.rows() != w1.rows() || state.residual.cols() != h.cols()) {
    throw ShapeError("ispasp_step: state does not conform to (w1, H)");
  }

  // Importance aggregated over examples: mu(w1ᵀ V) = w1ᵀ mu(V).
  const Vector y = matvec_t(w1, mu(state.residual));

  const std::size_t wide = std::min(2 * s, d_hid);
  const IndexSet omega = policy == SelectionPolicy::Value ? top_k_by_value(y, wide) : top_k_by_magnitude(y, wide);
  const IndexSet merged = nonzero_part(omega, y).unite(state.active);

  state.active = nonzero_part(top_s_within(state.h_sums, merged, s), state.h_sums);
  state.residual = residual_for(w1, h, state.dense_out, state.active);
  ++state.t;
  return state;
}

PruneResult ispasp_prune_stream(const DenseMatrix& w1, const HiddenSource& next_hidden, const PruneParams& params) {
  params.validate(w1.cols());
  using clock = std::chrono::steady_clock;

  DenseMatrix h = next_hidden();
  PruneState state = init_state(w1, h);
  PruneResult result;
  std::size_t unchanged = 0;

  for (std::size_t it = 0; it < params.iterations; ++it) {
    const auto start = clock::now();
    if (params.resample && it > 0) {
      h = next_hidden();
      rebase_state(state, w1, h);
    }
    const IndexSet previous = state.active;
    state = ispasp_step(std::move(state), w1, h, params.s, params.policy);
    const auto stop = clock::now();

    IterationRecord rec;
    rec.t = state.t;
    rec.residual_norm = frobenius_norm(state.residual);
    rec.hidden_residual = hidden_residual_norm(state.h_sums, state.active);
    rec.set_change = state.active.symmetric_difference_size(previous);
    rec.active_size = state.active.size();
    rec.step_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    result.trace.push_back(rec);

    unchanged = rec.set_change == 0 ? unchanged + 1 : 0;
    if (params.early_stop && unchanged >= params.stable_rounds) break;
  }
  result.active = state.active;
  return result;
}

PruneResult ispasp_prune_hidden(const DenseMatrix& w1, const DenseMatrix& h, const PruneParams& params) {
  PruneParams fixed = params;
  fixed.resample = false;
  return ispasp_prune_stream(w1, [&h] { return h; }, fixed);
}

PruneResult ispasp_prune(const TwoLayerNet& net, const InputSource& next_input, const PruneParams& params) {
  return ispasp_prune_stream(net.w1, [&] { return hidden(net, next_input()); }, params);
}

MultiLayerPruneResult ispasp_prune_multilayer(const MultiLayerNet& net, const InputSource& next_input,
                                              const std::vector<PruneParams>& per_layer) {
  const std::size_t layers = net.hidden_layers();
  if (per_layer.size() != layers) {
    throw RangeError("ispasp_prune_multilayer: expected " + std::to_string(layers) + " parameter sets");
  }
  for (std::size_t l = 0; l < layers; ++l) per_layer[l].validate(net.weights[l].rows());

  std::vector<DenseMatrix> weights = net.weights;
  MultiLayerPruneResult out{net, {}, {}};
  for (std::size_t l = 0; l < layers; ++l) {
    // Representation entering hidden layer l's consumer, through pruned layers 0..l.
    auto next_hidden = [&] {
      DenseMatrix act = next_input();
      for (std::size_t k = 0; k <= l; ++k) {
        act = matmul(weights[k], act);
        for (double& v : act.data()) v = v > 0.0 ? v : 0.0;
      }
      return act;
    };
    PruneResult r = ispasp_prune_stream(weights[l + 1], next_hidden, per_layer[l]);
    if (r.active.empty()) {
      // Dead layer on the sampled data: every choice gives the same output.
      r.active = top_k_by_value(Vector(weights[l].rows(), 0.0), per_layer[l].s);
    }
    weights[l] = gather_rows(weights[l], r.active);
    weights[l + 1] = gather_cols(weights[l + 1], r.active);
    out.active.push_back(r.active);
    out.per_layer.push_back(std::move(r));
  }
  out.pruned = MultiLayerNet(std::move(weights));
  return out;
}

IndexSet gfs_prune(const TwoLayerNet& net, const LabeledSource& next_batch, const GfsParams& params) {
  const std::size_t d_hid = net.d_hid();
  if (params.s == 0 || params.s > d_hid) throw RangeError("gfs_prune: s outside [1, d_hid]");
  Prng pool_rng = Prng::stream(params.seed, "gfs/pool");

  std::vector<std::size_t> selected;
  std::vector<char> taken(d_hid, 0);
  for (std::size_t it = 0; it < params.s; ++it) {
    const Batch batch = next_batch();
    const DenseMatrix h = hidden(net, batch.features);
    const std::size_t n = h.cols();
    const std::size_t d_out = net.d_out();

    DenseMatrix base(d_out, n);
    if (!selected.empty()) {
      std::vector<std::size_t> sorted = selected;
      std::sort(sorted.begin(), sorted.end());
      const IndexSet s_set(d_hid, sorted);
      base = matmul(gather_cols(net.w1, s_set), gather_rows(h, s_set));
    }

    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < d_hid; ++i)
      if (!taken[i]) remaining.push_back(i);
    std::vector<std::size_t> candidates;
    if (params.candidate_pool == 0 || params.candidate_pool >= remaining.size()) {
      candidates = remaining;
    } else {
      for (std::size_t k : pool_rng.sample_without_replacement(remaining.size(), params.candidate_pool))
        candidates.push_back(remaining[k]);
      std::sort(candidates.begin(), candidates.end());
    }

    std::vector<double> losses(candidates.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(candidates.size()); ++c) {
      const std::size_t neuron = candidates[static_cast<std::size_t>(c)];
      const auto w = net.w1.col(neuron);
      double total = 0.0;
      std::vector<double> z(d_out);
      for (std::size_t j = 0; j < n; ++j) {
        const double a = h(neuron, j);
        const auto b = base.col(j);
        double zmax = -INFINITY;
        for (std::size_t r = 0; r < d_out; ++r) {
          z[r] = b[r] + w[r] * a;
          zmax = std::max(zmax, z[r]);
        }
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        total += zmax + std::log(sum) - z[static_cast<std::size_t>(batch.labels[j])];
      }
      losses[static_cast<std::size_t>(c)] = total / static_cast<double>(n);
    }
    // candidates are ascending, so the first minimum is the lowest index.
    const auto best = static_cast<std::size_t>(std::min_element(losses.begin(), losses.end()) - losses.begin());
    selected.push_back(candidates[best]);
    taken[candidates[best]] = 1;
  }
  return IndexSet(d_hid, std::move(selected));
}

IndexSet topk_prune(const TwoLayerNet& net, const DenseMatrix& x, std::size_t s) {
  if (s == 0 || s > net.d_hid()) throw RangeError("topk_prune: s outside [1, d_hid]");
  return top_k_by_value(mu(hidden(net, x)), s);
}

}  // namespace ispasp::prune
