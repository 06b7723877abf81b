#include "ispasp/dataset.hpp"

#include <algorithm>

namespace ispasp {

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
  }
  return "unknown";
}

Dataset gather_examples(const Dataset& data, std::span<const std::size_t> order) {
  Dataset out;
  out.split = data.split;
  out.features = gather_cols(data.features, order);
  out.labels.reserve(order.size());
  for (std::size_t i : order) out.labels.push_back(data.labels[i]);
  return out;
}

BatchSampler::BatchSampler(const Dataset& data, std::size_t batch_size, std::uint64_t seed)
    : data_(&data), batch_size_(batch_size), rng_(seed) {
  if (batch_size == 0) throw RangeError("BatchSampler: batch_size must be >= 1");
  if (data.size() == 0) throw RangeError("BatchSampler: empty dataset");
  reshuffle();
}

void BatchSampler::reshuffle() {
  order_ = rng_.permutation(data_->size());
  cursor_ = 0;
}

std::size_t BatchSampler::batches_per_epoch() const noexcept {
  return (data_->size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> BatchSampler::next_indices() {
  if (cursor_ >= order_.size()) {
    reshuffle();
    ++epoch_;
  }
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return idx;
}

Batch BatchSampler::next_batch() {
  const auto idx = next_indices();
  Batch b{gather_cols(data_->features, idx), {}};
  b.labels.reserve(idx.size());
  for (std::size_t i : idx) b.labels.push_back(data_->labels[i]);
  return b;
}

}  // namespace ispasp
