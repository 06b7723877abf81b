#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ispasp/dataset.hpp"

namespace ispasp::mnist {

inline constexpr std::uint32_t kImagesMagic = 0x00000803;
inline constexpr std::uint32_t kLabelsMagic = 0x00000801;
inline constexpr std::size_t kPixels = 784;
/// Pixels plus the constant bias feature.
inline constexpr std::size_t kFeatureDim = kPixels + 1;

enum class IdxErrorKind { BadImagesMagic, BadLabelsMagic, Truncated, DimensionMismatch, LabelRange, CountMismatch };

class IdxError : public std::runtime_error {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  IdxErrorKind kind() const noexcept { return kind_; }

 private:
  IdxErrorKind kind_;
};

struct ImageSet {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, image-major
};

/// Big-endian IDX3 image file: magic, count, rows, cols, then bytes.
ImageSet parse_idx_images(std::span<const std::uint8_t> bytes);
/// Big-endian IDX1 label file: magic, count, then bytes in [0, 9].
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Features b / 255 per pixel plus a trailing 1.0; one example per column.
Dataset assemble(const ImageSet& images, std::span<const int> labels, SplitTag split);

/// Seeded shuffle, then the first ceil((1 - val_fraction) B) examples train.
std::pair<Dataset, Dataset> make_splits(const Dataset& full, double val_fraction, std::uint64_t seed);

struct MnistFiles {
  Dataset train;  // full 60k training set
  Dataset test;
};

/// Environment variable consulted when no directory is given.
inline constexpr const char* kDataDirEnv = "ISPASP_MNIST_DIR";

/// Reads the four standard uncompressed IDX files from `dir`.
MnistFiles load_mnist(const std::filesystem::path& dir);

/// `flag` when non-empty, else $ISPASP_MNIST_DIR, else nothing.
std::optional<std::filesystem::path> resolve_data_dir(const std::filesystem::path& flag);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace ispasp::mnist
