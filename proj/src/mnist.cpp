#include "ispasp/mnist.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "ispasp/prng.hpp"

namespace ispasp::mnist {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

ImageSet parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw IdxError(IdxErrorKind::Truncated, "idx images: header shorter than 16 bytes");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kImagesMagic) throw IdxError(IdxErrorKind::BadImagesMagic, "idx images: bad magic");
  ImageSet out;
  out.count = read_be32(bytes, 4);
  out.rows = read_be32(bytes, 8);
  out.cols = read_be32(bytes, 12);
  const std::size_t payload = out.count * out.rows * out.cols;
  if (bytes.size() - 16 < payload) throw IdxError(IdxErrorKind::Truncated, "idx images: truncated payload");
  if (bytes.size() - 16 > payload) {
    throw IdxError(IdxErrorKind::DimensionMismatch, "idx images: payload longer than declared dimensions");
  }
  out.pixels.assign(bytes.begin() + 16, bytes.end());
  return out;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw IdxError(IdxErrorKind::Truncated, "idx labels: header shorter than 8 bytes");
  if (read_be32(bytes, 0) != kLabelsMagic) throw IdxError(IdxErrorKind::BadLabelsMagic, "idx labels: bad magic");
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count) throw IdxError(IdxErrorKind::Truncated, "idx labels: truncated payload");
  if (bytes.size() - 8 > count) throw IdxError(IdxErrorKind::DimensionMismatch, "idx labels: trailing bytes");
  std::vector<int> labels;
  labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int y = bytes[8 + i];
    if (y > 9) throw IdxError(IdxErrorKind::LabelRange, "idx labels: label " + std::to_string(y) + " > 9");
    labels.push_back(y);
  }
  return labels;
}

Dataset assemble(const ImageSet& images, std::span<const int> labels, SplitTag split) {
  if (images.count != labels.size()) {
    throw IdxError(IdxErrorKind::CountMismatch, "idx: " + std::to_string(images.count) + " images but " +
                                                    std::to_string(labels.size()) + " labels");
  }
  const std::size_t pixels = images.rows * images.cols;
  if (images.count == 0 || pixels == 0) throw IdxError(IdxErrorKind::DimensionMismatch, "idx: empty image set");
  Dataset d;
  d.split = split;
  d.features = DenseMatrix(pixels + 1, images.count);
  for (std::size_t n = 0; n < images.count; ++n) {
    auto col = d.features.col(n);
    const std::uint8_t* src = images.pixels.data() + n * pixels;
    for (std::size_t k = 0; k < pixels; ++k) col[k] = static_cast<double>(src[k]) / 255.0;
    col[pixels] = 1.0;
  }
  d.labels.assign(labels.begin(), labels.end());
  return d;
}

std::pair<Dataset, Dataset> make_splits(const Dataset& full, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw RangeError("make_splits: val_fraction must lie in [0, 1)");
  const std::size_t n = full.size();
  Prng rng = Prng::stream(seed, "mnist/split");
  const auto perm = rng.permutation(n);
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - n_val;

  Dataset train = gather_examples(full, std::span(perm).first(n_train));
  train.split = SplitTag::Train;
  Dataset val;
  val.split = SplitTag::Val;
  if (n_val > 0) {
    val = gather_examples(full, std::span(perm).subspan(n_train));
    val.split = SplitTag::Val;
  } else {
    val.features = DenseMatrix(full.dim(), 1);
  }
  return {std::move(train), std::move(val)};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

MnistFiles load_mnist(const std::filesystem::path& dir) {
  for (const char* name : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                           "t10k-labels-idx1-ubyte"}) {
    if (!std::filesystem::exists(dir / name)) {
      throw std::runtime_error("MNIST file missing: " + (dir / name).string() +
                               " (run scripts/fetch_mnist.sh or set ISPASP_MNIST_DIR)");
    }
  }
  const auto train_images = parse_idx_images(read_file(dir / "train-images-idx3-ubyte"));
  const auto train_labels = parse_idx_labels(read_file(dir / "train-labels-idx1-ubyte"));
  const auto test_images = parse_idx_images(read_file(dir / "t10k-images-idx3-ubyte"));
  const auto test_labels = parse_idx_labels(read_file(dir / "t10k-labels-idx1-ubyte"));
  return {assemble(train_images, train_labels, SplitTag::Train), assemble(test_images, test_labels, SplitTag::Test)};
}

std::optional<std::filesystem::path> resolve_data_dir(const std::filesystem::path& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kDataDirEnv); env != nullptr && *env != '\0') return std::filesystem::path(env);
  return std::nullopt;
}

}  // namespace ispasp::mnist
