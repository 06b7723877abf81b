#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "ispasp/dataset.hpp"
#include "ispasp/matrix.hpp"

namespace ispasp {

/// Bias-free two-layer ReLU network  x -> w1 * relu(w0 * x).
struct TwoLayerNet {
  DenseMatrix w0;  // d_hid x d_in
  DenseMatrix w1;  // d_out x d_hid

  TwoLayerNet(DenseMatrix w0_, DenseMatrix w1_);

  std::size_t d_in() const noexcept { return w0.cols(); }
  std::size_t d_hid() const noexcept { return w0.rows(); }
  std::size_t d_out() const noexcept { return w1.rows(); }
};

/// Weights W0..WL; ReLU follows every layer except the last.
struct MultiLayerNet {
  std::vector<DenseMatrix> weights;

  explicit MultiLayerNet(std::vector<DenseMatrix> w);

  std::size_t hidden_layers() const noexcept { return weights.size() - 1; }
};

/// relu(w0 * x)
DenseMatrix hidden(const TwoLayerNet& net, const DenseMatrix& x);
DenseMatrix forward(const TwoLayerNet& net, const DenseMatrix& x);
DenseMatrix forward_multi(const MultiLayerNet& net, const DenseMatrix& x);
/// Post-activation representations H1..HL of every hidden layer.
std::vector<DenseMatrix> hidden_layers(const MultiLayerNet& net, const DenseMatrix& x);

/// Keeps hidden units in `keep`: rows of w0 and columns of w1.
TwoLayerNet extract_subnetwork(const TwoLayerNet& net, const IndexSet& keep);

/// Column-wise softmax of logits (classes x batch).
DenseMatrix softmax(const DenseMatrix& logits);
/// Mean softmax cross-entropy over the batch.
double cross_entropy(const DenseMatrix& logits, std::span<const int> labels);
std::size_t count_correct(const DenseMatrix& logits, std::span<const int> labels);
double accuracy(const TwoLayerNet& net, const Dataset& data, std::size_t chunk = 2048);

struct Gradients {
  DenseMatrix w0;
  DenseMatrix w1;
  double loss = 0.0;
};

/// Gradients of the mean cross-entropy over the batch columns.
Gradients backprop_gradients(const TwoLayerNet& net, const DenseMatrix& x, std::span<const int> labels);

/// Raised when the training loss becomes non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  static constexpr int kExitCode = 3;
};

/// Multiply the learning rate by `factor` once each milestone (a fraction of
/// the total epochs) has been completed.
struct StepSchedule {
  double factor = 0.1;
  std::vector<double> milestones{0.5, 0.75};

  double multiplier(std::size_t epoch, std::size_t total_epochs) const noexcept;
};

struct TrainConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  std::size_t epochs = 1;
  std::size_t batch_size = 128;
  StepSchedule schedule;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  TwoLayerNet net;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

/// Mini-batch SGD with heavy-ball momentum: v <- m v + g, w <- w - lr v.
/// Throws TrainingDiverged on a non-finite batch loss.
TrainResult sgd_train(TwoLayerNet net, const Dataset& data, const TrainConfig& cfg);

/// Post-pruning training of a compacted network; same update rule.
inline TrainResult fine_tune(TwoLayerNet pruned, const Dataset& data, const TrainConfig& cfg) {
  return sgd_train(std::move(pruned), data, cfg);
}

// Checkpoint layout (all little-endian):
//   8-byte magic "ISPASPW1", u64 layer count,
//   per layer: u64 rows, u64 cols,
//   then per layer: rows*cols f64 values in row-major order.
void write_checkpoint(std::ostream& out, const std::vector<DenseMatrix>& layers);
std::vector<DenseMatrix> read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const std::vector<DenseMatrix>& layers);
std::vector<DenseMatrix> load_checkpoint(const std::filesystem::path& path);

inline std::vector<DenseMatrix> layers_of(const TwoLayerNet& net) { return {net.w0, net.w1}; }
TwoLayerNet two_layer_from(std::vector<DenseMatrix> layers);

}  // namespace ispasp
