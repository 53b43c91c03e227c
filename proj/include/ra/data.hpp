#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ra/types.hpp"

namespace ra::data {

enum class Split { kTrain, kTest };

/// Samples are rows of `inputs`. Values are raw (e.g. pixel bytes as
/// doubles) until standardize_apply is run.
struct LabeledDataset {
  Matrix inputs;             // N x d
  std::vector<int> labels;   // N entries in [0, class_count)
  int class_count = 0;
  Split split = Split::kTrain;

  Index size() const { return inputs.rows(); }
  Index dim() const { return inputs.cols(); }
};

enum class DataSource {
  kMnist,
  kFashionMnist,
  kCifar10,
  kCifar100,
  kSynthetic,
  kDigits,
};

struct DatasetSpec {
  DataSource source = DataSource::kSynthetic;
  std::string path;               // directory with the binary files
  std::vector<int> class_subset;  // empty = keep all classes
  Index train_cap = 0;            // 0 = no cap
  Index test_cap = 0;
  std::uint64_t seed = 0;

  // synthetic-source knobs
  int classes_total = 10;
  Index per_class = 200;
  Index dim = 16;          // gaussian mixture only; digits are 28x28
  double separation = 3.0;
};

struct DatasetPair {
  LabeledDataset train;
  LabeledDataset test;
};

/// Per-feature mean and inverse standard deviation fitted on a training
/// split. Features with zero raw variance get inv_std = 0, so they map to
/// a constant 0.
struct FeatureStats {
  Vector mean;
  Vector inv_std;
};

/// Parse an IDX image/label stream pair (big-endian magics 0x00000803 and
/// 0x00000801). Pixel values are kept raw in [0, 255]. Malformed streams
/// throw FormatError naming the byte offset.
LabeledDataset parse_idx(std::span<const std::uint8_t> image_bytes,
                         std::span<const std::uint8_t> label_bytes);

/// Serialize back to the IDX pair; inverse of parse_idx for byte-valued
/// inputs with the given image geometry.
void serialize_idx(const LabeledDataset& ds, Index rows, Index cols,
                   std::vector<std::uint8_t>& image_bytes,
                   std::vector<std::uint8_t>& label_bytes);

/// Parse CIFAR binary records: 3073 bytes per record for class_count 10,
/// 3074 (coarse + fine label, fine kept) for class_count 100.
LabeledDataset parse_cifar(std::span<const std::uint8_t> record_bytes,
                           int class_count);

/// Keep only the listed original classes and re-index labels to
/// 0..classes.size()-1 in the given order. Pixel rows are copied bit-exactly.
LabeledDataset subset_classes(const LabeledDataset& ds,
                              const std::vector<int>& classes);

/// Seeded shuffle followed by truncation to at most `cap` samples.
LabeledDataset cap_samples(const LabeledDataset& ds, Index cap,
                           std::uint64_t seed);

FeatureStats standardize_fit(const LabeledDataset& train);
LabeledDataset standardize_apply(LabeledDataset ds, const FeatureStats& stats);

/// Class k is an isotropic Gaussian centered at separation * e_k.
LabeledDataset synthetic_gaussian_mixture(int class_count, Index per_class,
                                          Index dim, double separation,
                                          std::uint64_t seed);

/// Deterministic 28x28 rendered digit glyphs (classes 0..9) with random
/// affine jitter, stroke width variation, and pixel noise. Values are
/// integers in [0, 255] so an IDX round trip is exact. jitter scales the
/// affine/noise ranges (1 = mild, ~2 = heavily distorted).
LabeledDataset synthetic_digits(Index per_class, std::uint64_t seed,
                                double jitter = 1.0);

/// Full ingestion pipeline: read/generate, subset classes, cap samples, and
/// standardize both splits with statistics fitted on the training split.
DatasetPair load_dataset(const DatasetSpec& spec);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace ra::data
