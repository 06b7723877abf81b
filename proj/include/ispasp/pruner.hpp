#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ispasp/dataset.hpp"
#include "ispasp/matrix.hpp"
#include "ispasp/mlp.hpp"

namespace ispasp::prune {

/// How the 2s candidate neurons are ranked by aggregated importance.
enum class SelectionPolicy {
  Value,      // largest signed value: only neurons whose growth would cut the residual
  Magnitude,  // largest |value|
};

struct PruneParams {
  std::size_t s = 1;
  std::size_t iterations = 20;  // T
  std::size_t batch_size = 512;
  bool resample = false;  // draw a fresh batch every iteration
  std::uint64_t seed = 0;
  SelectionPolicy policy = SelectionPolicy::Value;
  bool early_stop = false;  // stop once the active set is unchanged for `stable_rounds` iterations
  std::size_t stable_rounds = 3;

  void validate(std::size_t d_hid) const;
};

/// Evolving state of one pruning run against a fixed hidden batch H.
struct PruneState {
  IndexSet active;       // S
  std::size_t t = 0;
  DenseMatrix residual;  // V = U - w1[:, S] H[S, :]
  DenseMatrix dense_out; // U = w1 H
  Vector h_sums;         // mu(H)
};

/// Y = w1ᵀ V; Y(i, j) is the importance of neuron i on example j.
DenseMatrix importance(const DenseMatrix& w1, const DenseMatrix& residual);

/// 0.5 * ||w1 H - u_prime||_F^2
double reconstruction_loss(const DenseMatrix& w1, const DenseMatrix& h, const DenseMatrix& u_prime);

/// Central finite-difference gradient of reconstruction_loss in H, u_prime held fixed.
DenseMatrix importance_fd(const DenseMatrix& w1, const DenseMatrix& h, const DenseMatrix& u_prime,
                          double step = 1e-5);

/// U - w1[:, S] H[S, :] computed on the compacted active columns.
DenseMatrix residual_for(const DenseMatrix& w1, const DenseMatrix& h, const DenseMatrix& dense_out,
                         const IndexSet& active);

/// S = {}, U = w1 H, V = U.
PruneState init_state(const DenseMatrix& w1, const DenseMatrix& h);

/// Re-targets `state` at a new batch: U, mu(H) and V are recomputed for the current S.
void rebase_state(PruneState& state, const DenseMatrix& w1, const DenseMatrix& h);

/// One pass of the importance / merge / threshold / residual loop.
PruneState ispasp_step(PruneState state, const DenseMatrix& w1, const DenseMatrix& h, std::size_t s,
                       SelectionPolicy policy = SelectionPolicy::Value);

struct IterationRecord {
  std::size_t t = 0;
  double residual_norm = 0.0;    // ||V_t||_F on the iteration's batch
  double hidden_residual = 0.0;  // ||mu(H) - mu(H)|_S||_2
  std::size_t set_change = 0;    // |S_t symmetric-difference S_{t-1}|
  std::size_t active_size = 0;
  double step_ms = 0.0;
};

struct PruneResult {
  IndexSet active;
  std::vector<IterationRecord> trace;
};

/// Supplies one hidden-representation batch per call.
using HiddenSource = std::function<DenseMatrix()>;
/// Supplies one input batch (d_in x B) per call.
using InputSource = std::function<DenseMatrix()>;
/// Supplies one labelled batch per call.
using LabeledSource = std::function<Batch()>;

/// Pruning against one fixed hidden matrix; `params.resample` is ignored.
PruneResult ispasp_prune_hidden(const DenseMatrix& w1, const DenseMatrix& h, const PruneParams& params);

/// Pruning with hidden batches drawn from `next_hidden`: once, or at every
/// iteration when `params.resample` is set.
PruneResult ispasp_prune_stream(const DenseMatrix& w1, const HiddenSource& next_hidden, const PruneParams& params);

/// Two-layer network pruning from input batches.
PruneResult ispasp_prune(const TwoLayerNet& net, const InputSource& next_input, const PruneParams& params);

struct MultiLayerPruneResult {
  MultiLayerNet pruned;
  std::vector<IndexSet> active;  // one per hidden layer, first to last
  std::vector<PruneResult> per_layer;
};

/// Prunes hidden layers first to last; layer l sees the representations
/// produced by the already-pruned layers before it.
MultiLayerPruneResult ispasp_prune_multilayer(const MultiLayerNet& net, const InputSource& next_input,
                                              const std::vector<PruneParams>& per_layer);

struct GfsParams {
  std::size_t s = 1;
  std::size_t candidate_pool = 0;  // 0 searches every remaining neuron
  std::uint64_t seed = 0;
};

/// Greedy forward selection: starting from the empty set, each iteration
/// draws a batch and adds the neuron whose inclusion gives the lowest
/// cross-entropy of the sub-network. Ties go to the lowest index.
IndexSet gfs_prune(const TwoLayerNet& net, const LabeledSource& next_batch, const GfsParams& params);

/// One-shot selection of the s neurons with the largest summed activation.
IndexSet topk_prune(const TwoLayerNet& net, const DenseMatrix& x, std::size_t s);

}  // namespace ispasp::prune
