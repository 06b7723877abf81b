#include "ispasp/mlp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "ispasp/kernels.hpp"

namespace ispasp {

TwoLayerNet::TwoLayerNet(DenseMatrix w0_, DenseMatrix w1_) : w0(std::move(w0_)), w1(std::move(w1_)) {
  if (w1.cols() != w0.rows()) {
    throw ShapeError("TwoLayerNet: w1 has " + std::to_string(w1.cols()) + " columns but w0 has " +
                     std::to_string(w0.rows()) + " rows");
  }
}

MultiLayerNet::MultiLayerNet(std::vector<DenseMatrix> w) : weights(std::move(w)) {
  if (weights.size() < 2) throw ShapeError("MultiLayerNet: needs at least two weight matrices");
  for (std::size_t l = 1; l < weights.size(); ++l) {
    if (weights[l].cols() != weights[l - 1].rows()) {
      throw ShapeError("MultiLayerNet: layer " + std::to_string(l) + " does not conform to its predecessor");
    }
  }
}

DenseMatrix hidden(const TwoLayerNet& net, const DenseMatrix& x) {
  if (x.rows() != net.d_in()) throw ShapeError("hidden: input has wrong feature count");
  DenseMatrix h = matmul(net.w0, x);
  kernels::parallel::relu(h.data());
  return h;
}

DenseMatrix forward(const TwoLayerNet& net, const DenseMatrix& x) { return matmul(net.w1, hidden(net, x)); }

std::vector<DenseMatrix> hidden_layers(const MultiLayerNet& net, const DenseMatrix& x) {
  std::vector<DenseMatrix> out;
  out.reserve(net.hidden_layers());
  const DenseMatrix* input = &x;
  for (std::size_t l = 0; l + 1 < net.weights.size(); ++l) {
    if (input->rows() != net.weights[l].cols()) throw ShapeError("hidden_layers: input has wrong feature count");
    DenseMatrix h = matmul(net.weights[l], *input);
    kernels::parallel::relu(h.data());
    out.push_back(std::move(h));
    input = &out.back();
  }
  return out;
}

DenseMatrix forward_multi(const MultiLayerNet& net, const DenseMatrix& x) {
  const auto hs = hidden_layers(net, x);
  return matmul(net.weights.back(), hs.back());
}

TwoLayerNet extract_subnetwork(const TwoLayerNet& net, const IndexSet& keep) {
  if (keep.empty()) throw RangeError("extract_subnetwork: empty neuron set");
  if (keep.indices().back() >= net.d_hid()) throw RangeError("extract_subnetwork: neuron index out of range");
  return TwoLayerNet(gather_rows(net.w0, keep), gather_cols(net.w1, keep));
}

DenseMatrix softmax(const DenseMatrix& logits) {
  DenseMatrix p(logits.rows(), logits.cols());
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    const auto z = logits.col(j);
    auto out = p.col(j);
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      out[i] = std::exp(z[i] - zmax);
      total += out[i];
    }
    for (double& v : out) v /= total;
  }
  return p;
}

namespace {

void check_labels(const DenseMatrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.cols()) throw ShapeError("label count does not match batch size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= logits.rows()) throw RangeError("label outside class range");
  }
}

}  // namespace

double cross_entropy(const DenseMatrix& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  double total = 0.0;
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    const auto z = logits.col(j);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    total += zmax + std::log(sum) - z[static_cast<std::size_t>(labels[j])];
  }
  return total / static_cast<double>(logits.cols());
}

std::size_t count_correct(const DenseMatrix& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  std::size_t correct = 0;
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    const auto z = logits.col(j);
    const auto best = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    if (best == static_cast<std::size_t>(labels[j])) ++correct;
  }
  return correct;
}

double accuracy(const TwoLayerNet& net, const Dataset& data, std::size_t chunk) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const DenseMatrix x = gather_cols(data.features, idx);
    correct += count_correct(forward(net, x),
                             std::span<const int>(data.labels).subspan(start, end - start));
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Gradients backprop_gradients(const TwoLayerNet& net, const DenseMatrix& x, std::span<const int> labels) {
  if (x.rows() != net.d_in()) throw ShapeError("backprop_gradients: input has wrong feature count");
  const DenseMatrix pre = matmul(net.w0, x);
  DenseMatrix h = pre;
  kernels::parallel::relu(h.data());
  const DenseMatrix logits = matmul(net.w1, h);

  Gradients g{DenseMatrix(1, 1), DenseMatrix(1, 1), cross_entropy(logits, labels)};
  DenseMatrix delta = softmax(logits);
  const double inv_batch = 1.0 / static_cast<double>(x.cols());
  for (std::size_t j = 0; j < delta.cols(); ++j) delta(static_cast<std::size_t>(labels[j]), j) -= 1.0;
  delta *= inv_batch;

  g.w1 = matmul_nt(delta, h);
  DenseMatrix back = matmul_tn(net.w1, delta);
  auto bd = back.data();
  const auto pd = pre.data();
  for (std::size_t i = 0; i < bd.size(); ++i)
    if (!(pd[i] > 0.0)) bd[i] = 0.0;
  g.w0 = matmul_nt(back, x);
  return g;
}

double StepSchedule::multiplier(std::size_t epoch, std::size_t total_epochs) const noexcept {
  double m = 1.0;
  for (double frac : milestones)
    if (static_cast<double>(epoch) >= frac * static_cast<double>(total_epochs)) m *= factor;
  return m;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw RangeError("TrainConfig: lr must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw RangeError("TrainConfig: momentum must lie in [0, 1)");
  if (batch_size == 0) throw RangeError("TrainConfig: batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) throw RangeError("TrainConfig: weight_decay must be >= 0");
  double prev = 0.0;
  for (double m : schedule.milestones) {
    if (!(m > prev && m < 1.0)) throw RangeError("TrainConfig: milestones must increase strictly inside (0, 1)");
    prev = m;
  }
}

namespace {

void momentum_step(DenseMatrix& w, DenseMatrix& velocity, const DenseMatrix& grad, double lr, double momentum,
                   double weight_decay) {
  auto wd = w.data();
  auto vd = velocity.data();
  const auto gd = grad.data();
  for (std::size_t i = 0; i < wd.size(); ++i) {
    const double g = gd[i] + weight_decay * wd[i];
    vd[i] = momentum * vd[i] + g;
    wd[i] -= lr * vd[i];
  }
}

}  // namespace

TrainResult sgd_train(TwoLayerNet net, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw RangeError("sgd_train: empty dataset");
  TrainResult result{std::move(net), {}};
  if (cfg.epochs == 0) return result;

  TwoLayerNet& model = result.net;
  DenseMatrix v0(model.w0.rows(), model.w0.cols());
  DenseMatrix v1(model.w1.rows(), model.w1.cols());
  BatchSampler sampler(data, cfg.batch_size, derive_seed(cfg.seed, "sgd/batches"));

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr * cfg.schedule.multiplier(epoch, cfg.epochs);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < sampler.batches_per_epoch(); ++b) {
      const Batch batch = sampler.next_batch();
      const Gradients g = backprop_gradients(model, batch.features, batch.labels);
      if (!std::isfinite(g.loss)) {
        throw TrainingDiverged("sgd_train: non-finite loss in epoch " + std::to_string(epoch));
      }
      loss_sum += g.loss * static_cast<double>(batch.labels.size());
      seen += batch.labels.size();
      momentum_step(model.w0, v0, g.w0, lr, cfg.momentum, cfg.weight_decay);
      momentum_step(model.w1, v1, g.w1, lr, cfg.momentum, cfg.weight_decay);
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
  }
  if (!model.w0.all_finite() || !model.w1.all_finite()) throw TrainingDiverged("sgd_train: non-finite weights");
  return result;
}

namespace {

constexpr std::array<char, 8> kMagic{'I', 'S', 'P', 'A', 'S', 'P', 'W', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("checkpoint: truncated header");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<DenseMatrix>& layers) {
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, layers.size());
  for (const auto& m : layers) {
    put_u64(out, m.rows());
    put_u64(out, m.cols());
  }
  for (const auto& m : layers) {
    for (std::size_t r = 0; r < m.rows(); ++r)
      for (std::size_t c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

std::vector<DenseMatrix> read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw std::runtime_error("checkpoint: bad magic");
  const std::uint64_t count = get_u64(in);
  if (count == 0 || count > 64) throw std::runtime_error("checkpoint: implausible layer count");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> dims;
  for (std::uint64_t l = 0; l < count; ++l) {
    const auto r = get_u64(in);
    const auto c = get_u64(in);
    if (r == 0 || c == 0 || r > (1u << 24) || c > (1u << 24)) throw std::runtime_error("checkpoint: bad layer shape");
    dims.emplace_back(r, c);
  }
  std::vector<DenseMatrix> layers;
  for (const auto& [r, c] : dims) {
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        double v = 0.0;
        if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("checkpoint: truncated data");
        if (!std::isfinite(v)) throw std::runtime_error("checkpoint: non-finite weight");
        m(i, j) = v;
      }
    layers.push_back(std::move(m));
  }
  return layers;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<DenseMatrix>& layers) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string());
  write_checkpoint(out, layers);
}

std::vector<DenseMatrix> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  return read_checkpoint(in);
}

TwoLayerNet two_layer_from(std::vector<DenseMatrix> layers) {
  if (layers.size() != 2) throw ShapeError("two_layer_from: expected exactly two layers");
  return TwoLayerNet(std::move(layers[0]), std::move(layers[1]));
}

}  // namespace ispasp
