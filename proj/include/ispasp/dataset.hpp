#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ispasp/matrix.hpp"
#include "ispasp/prng.hpp"

namespace ispasp {

enum class SplitTag { Train, Val, Test };

std::string to_string(SplitTag tag);

/// Labelled examples stored one per column of `features` (d_in x B).
struct Dataset {
  DenseMatrix features{1, 1};
  std::vector<int> labels;
  SplitTag split = SplitTag::Train;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.rows(); }
};

/// Compacted copy of the listed examples, in the listed order.
Dataset gather_examples(const Dataset& data, std::span<const std::size_t> order);

struct Batch {
  DenseMatrix features;
  std::vector<int> labels;
};

/// Serves an epoch as consecutive slices of a seeded permutation; the last
/// slice may be short. A fresh permutation is drawn at each epoch boundary.
class BatchSampler {
 public:
  BatchSampler(const Dataset& data, std::size_t batch_size, std::uint64_t seed);

  Batch next_batch();
  /// Index list of the batch `next_batch` would return, advancing the cursor.
  std::vector<std::size_t> next_indices();

  std::size_t batches_per_epoch() const noexcept;
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  void reshuffle();

  const Dataset* data_;
  std::size_t batch_size_;
  Prng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace ispasp
