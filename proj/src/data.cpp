#include "ra/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>

#include "ra/random.hpp"

namespace ra::data {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::uint64_t kSplitSeedMix = 0x9e3779b97f4a7c15ull;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset,
                        const char* what) {
  if (offset + 4 > bytes.size())
    throw FormatError("idx: truncated " + std::string(what) + " at byte " +
                      std::to_string(offset));
  return (std::uint32_t(bytes[offset]) << 24) |
         (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) |
         std::uint32_t(bytes[offset + 3]);
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

int max_label_plus_one(const std::vector<int>& labels) {
  int m = 0;
  for (int l : labels) m = std::max(m, l + 1);
  return m;
}

}  // namespace

LabeledDataset parse_idx(std::span<const std::uint8_t> image_bytes,
                         std::span<const std::uint8_t> label_bytes) {
  const std::uint32_t image_magic = read_be32(image_bytes, 0, "image magic");
  if (image_magic != kIdxImageMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "idx: bad image magic 0x%08x at byte 0",
                  image_magic);
    throw FormatError(buf);
  }
  const std::uint32_t label_magic = read_be32(label_bytes, 0, "label magic");
  if (label_magic != kIdxLabelMagic) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "idx: bad label magic 0x%08x at byte 0",
                  label_magic);
    throw FormatError(buf);
  }

  const std::uint32_t image_count = read_be32(image_bytes, 4, "image count");
  const std::uint32_t rows = read_be32(image_bytes, 8, "row count");
  const std::uint32_t cols = read_be32(image_bytes, 12, "column count");
  const std::uint32_t label_count = read_be32(label_bytes, 4, "label count");
  if (image_count != label_count)
    throw FormatError("idx: image/label count mismatch (" +
                      std::to_string(image_count) + " vs " +
                      std::to_string(label_count) + ") at byte 4");
  if (image_count == 0) throw std::invalid_argument("idx: empty dataset");

  const std::size_t pixel_count =
      std::size_t(image_count) * std::size_t(rows) * std::size_t(cols);
  if (16 + pixel_count > image_bytes.size())
    throw FormatError("idx: truncated image payload at byte " +
                      std::to_string(image_bytes.size()) + " (need " +
                      std::to_string(16 + pixel_count) + " bytes)");
  if (8 + std::size_t(label_count) > label_bytes.size())
    throw FormatError("idx: truncated label payload at byte " +
                      std::to_string(label_bytes.size()) + " (need " +
                      std::to_string(8 + label_count) + " bytes)");

  LabeledDataset ds;
  const Index d = Index(rows) * Index(cols);
  ds.inputs.resize(Index(image_count), d);
  ds.labels.resize(image_count);
  for (std::size_t n = 0; n < image_count; ++n) {
    const std::size_t base = 16 + n * std::size_t(d);
    for (Index j = 0; j < d; ++j)
      ds.inputs(Index(n), j) = double(image_bytes[base + std::size_t(j)]);
    ds.labels[n] = int(label_bytes[8 + n]);
  }
  ds.class_count = max_label_plus_one(ds.labels);
  return ds;
}

void serialize_idx(const LabeledDataset& ds, Index rows, Index cols,
                   std::vector<std::uint8_t>& image_bytes,
                   std::vector<std::uint8_t>& label_bytes) {
  if (rows * cols != ds.dim())
    throw std::invalid_argument("serialize_idx: geometry does not match dim");
  image_bytes.clear();
  label_bytes.clear();
  append_be32(image_bytes, kIdxImageMagic);
  append_be32(image_bytes, std::uint32_t(ds.size()));
  append_be32(image_bytes, std::uint32_t(rows));
  append_be32(image_bytes, std::uint32_t(cols));
  append_be32(label_bytes, kIdxLabelMagic);
  append_be32(label_bytes, std::uint32_t(ds.size()));
  for (Index n = 0; n < ds.size(); ++n) {
    for (Index j = 0; j < ds.dim(); ++j) {
      const double v = ds.inputs(n, j);
      if (v < 0.0 || v > 255.0 || v != std::floor(v))
        throw std::invalid_argument(
            "serialize_idx: values must be integers in [0, 255]");
      image_bytes.push_back(static_cast<std::uint8_t>(v));
    }
    label_bytes.push_back(static_cast<std::uint8_t>(ds.labels[n]));
  }
}

LabeledDataset parse_cifar(std::span<const std::uint8_t> record_bytes,
                           int class_count) {
  if (class_count != 10 && class_count != 100)
    throw std::invalid_argument("parse_cifar: class_count must be 10 or 100");
  const std::size_t record_size = class_count == 10 ? 3073 : 3074;
  const std::size_t label_offset = class_count == 10 ? 0 : 1;  // fine label
  if (record_bytes.size() % record_size != 0)
    throw FormatError("cifar: stream length " +
                      std::to_string(record_bytes.size()) +
                      " is not a multiple of the record size " +
                      std::to_string(record_size));
  const std::size_t n = record_bytes.size() / record_size;
  if (n == 0) throw std::invalid_argument("cifar: empty stream");

  LabeledDataset ds;
  ds.inputs.resize(Index(n), 3072);
  ds.labels.resize(n);
  ds.class_count = class_count;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * record_size;
    const int label = int(record_bytes[base + label_offset]);
    if (label >= class_count)
      throw FormatError("cifar: label " + std::to_string(label) +
                        " out of range at byte " +
                        std::to_string(base + label_offset));
    ds.labels[i] = label;
    const std::size_t pixels = base + label_offset + 1;
    for (Index j = 0; j < 3072; ++j)
      ds.inputs(Index(i), j) = double(record_bytes[pixels + std::size_t(j)]);
  }
  return ds;
}

LabeledDataset subset_classes(const LabeledDataset& ds,
                              const std::vector<int>& classes) {
  if (classes.empty())
    throw std::invalid_argument("subset_classes: class list is empty");
  std::set<int> seen;
  for (int c : classes) {
    if (c < 0 || c >= ds.class_count)
      throw std::invalid_argument("subset_classes: unknown class id " +
                                  std::to_string(c));
    if (!seen.insert(c).second)
      throw std::invalid_argument("subset_classes: duplicate class id " +
                                  std::to_string(c));
  }
  std::vector<int> relabel(std::size_t(ds.class_count), -1);
  for (std::size_t i = 0; i < classes.size(); ++i)
    relabel[std::size_t(classes[i])] = int(i);

  std::vector<Index> keep;
  for (Index n = 0; n < ds.size(); ++n)
    if (relabel[std::size_t(ds.labels[std::size_t(n)])] >= 0) keep.push_back(n);

  LabeledDataset out;
  out.inputs.resize(Index(keep.size()), ds.dim());
  out.labels.resize(keep.size());
  out.class_count = int(classes.size());
  out.split = ds.split;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.inputs.row(Index(i)) = ds.inputs.row(keep[i]);
    out.labels[i] = relabel[std::size_t(ds.labels[std::size_t(keep[i])])];
  }
  return out;
}

LabeledDataset cap_samples(const LabeledDataset& ds, Index cap,
                           std::uint64_t seed) {
  if (cap <= 0 || cap >= ds.size()) return ds;
  Rng rng(seed);
  const auto perm = rng.permutation(std::size_t(ds.size()));
  LabeledDataset out;
  out.inputs.resize(cap, ds.dim());
  out.labels.resize(std::size_t(cap));
  out.class_count = ds.class_count;
  out.split = ds.split;
  for (Index i = 0; i < cap; ++i) {
    out.inputs.row(i) = ds.inputs.row(Index(perm[std::size_t(i)]));
    out.labels[std::size_t(i)] = ds.labels[perm[std::size_t(i)]];
  }
  return out;
}

FeatureStats standardize_fit(const LabeledDataset& train) {
  if (train.size() == 0)
    throw std::invalid_argument("standardize_fit: empty dataset");
  FeatureStats stats;
  stats.mean = train.inputs.colwise().mean();
  stats.inv_std.resize(train.dim());
  for (Index j = 0; j < train.dim(); ++j) {
    const double var =
        (train.inputs.col(j).array() - stats.mean(j)).square().mean();
    const double sd = std::sqrt(var);
    stats.inv_std(j) =
        sd <= 1e-12 * std::max(1.0, std::abs(stats.mean(j))) ? 0.0 : 1.0 / sd;
  }
  return stats;
}

LabeledDataset standardize_apply(LabeledDataset ds, const FeatureStats& stats) {
  if (stats.mean.size() != ds.dim())
    throw std::invalid_argument("standardize_apply: dimension mismatch");
  for (Index j = 0; j < ds.dim(); ++j) {
    if (stats.inv_std(j) == 0.0)
      ds.inputs.col(j).setZero();
    else
      ds.inputs.col(j) =
          (ds.inputs.col(j).array() - stats.mean(j)) * stats.inv_std(j);
  }
  return ds;
}

LabeledDataset synthetic_gaussian_mixture(int class_count, Index per_class,
                                          Index dim, double separation,
                                          std::uint64_t seed) {
  if (class_count < 1 || per_class < 1 || dim < 1)
    throw std::invalid_argument("synthetic_gaussian_mixture: counts must be positive");
  if (dim < class_count)
    throw std::invalid_argument("synthetic_gaussian_mixture: dim must be >= class count");
  Rng rng(seed);
  LabeledDataset ds;
  ds.inputs.resize(Index(class_count) * per_class, dim);
  ds.labels.resize(std::size_t(class_count) * std::size_t(per_class));
  ds.class_count = class_count;
  Index row = 0;
  for (int k = 0; k < class_count; ++k) {
    for (Index i = 0; i < per_class; ++i, ++row) {
      ds.inputs.row(row) = rng.gaussian_vector(dim).transpose();
      ds.inputs(row, k) += separation;
      ds.labels[std::size_t(row)] = k;
    }
  }
  return ds;
}

namespace {

using Point = std::array<double, 2>;
using StrokeList = std::vector<std::vector<Point>>;

std::vector<Point> ellipse(double cx, double cy, double rx, double ry) {
  std::vector<Point> pts;
  for (int i = 0; i <= 28; ++i) {
    const double t = 2.0 * std::numbers::pi * double(i) / 28.0;
    pts.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return pts;
}

// Unit-square stroke templates for the digits 0..9, y pointing down.
const std::array<StrokeList, 10>& digit_glyphs() {
  static const std::array<StrokeList, 10> glyphs = {{
      {ellipse(0.50, 0.50, 0.26, 0.36)},
      {{{0.36, 0.26}, {0.52, 0.13}, {0.52, 0.88}}},
      {{{0.27, 0.30}, {0.33, 0.17}, {0.52, 0.12}, {0.70, 0.19}, {0.74, 0.35},
        {0.62, 0.52}, {0.40, 0.68}, {0.26, 0.86}, {0.76, 0.86}}},
      {{{0.28, 0.17}, {0.50, 0.12}, {0.70, 0.20}, {0.70, 0.36}, {0.52, 0.47},
        {0.72, 0.58}, {0.73, 0.76}, {0.53, 0.87}, {0.28, 0.81}}},
      {{{0.64, 0.12}, {0.24, 0.62}, {0.80, 0.62}}, {{0.64, 0.33}, {0.64, 0.88}}},
      {{{0.72, 0.14}, {0.32, 0.14}, {0.29, 0.47}, {0.52, 0.42}, {0.71, 0.52},
        {0.72, 0.72}, {0.52, 0.86}, {0.28, 0.80}}},
      {{{0.62, 0.13}, {0.43, 0.27}, {0.31, 0.48}, {0.29, 0.70}, {0.42, 0.86},
        {0.62, 0.84}, {0.71, 0.68}, {0.63, 0.53}, {0.44, 0.52}, {0.32, 0.62}}},
      {{{0.24, 0.14}, {0.76, 0.14}, {0.46, 0.88}}, {{0.33, 0.50}, {0.62, 0.50}}},
      {ellipse(0.50, 0.30, 0.19, 0.17), ellipse(0.50, 0.66, 0.23, 0.20)},
      {ellipse(0.52, 0.33, 0.20, 0.20), {{0.72, 0.33}, {0.70, 0.65}, {0.58, 0.88}}},
  }};
  return glyphs;
}

void stamp(std::array<double, 784>& ink, double qx, double qy, double sigma) {
  constexpr int kSide = 28;
  const double reach = 2.5 * sigma;
  const int c0 = std::max(0, int(std::floor((qx - reach) * kSide)));
  const int c1 = std::min(kSide - 1, int(std::ceil((qx + reach) * kSide)));
  const int r0 = std::max(0, int(std::floor((qy - reach) * kSide)));
  const int r1 = std::min(kSide - 1, int(std::ceil((qy + reach) * kSide)));
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dx = (c + 0.5) / kSide - qx;
      const double dy = (r + 0.5) / kSide - qy;
      const double v = std::exp(-(dx * dx + dy * dy) * inv2s2);
      double& cell = ink[std::size_t(r * kSide + c)];
      cell = std::max(cell, v);
    }
  }
}

void render_digit(int digit, Rng& rng, double jitter, double* out) {
  const double theta = (rng.uniform() - 0.5) * 0.44 * jitter;
  const double sx = 1.0 - (0.20 - rng.uniform() * 0.35) * jitter;
  const double sy = 1.0 - (0.20 - rng.uniform() * 0.35) * jitter;
  const double shear = (rng.uniform() - 0.5) * 0.24 * jitter;
  const double tx = (rng.uniform() - 0.5) * 0.18 * jitter;
  const double ty = (rng.uniform() - 0.5) * 0.18 * jitter;
  const double sigma = (1.1 + rng.uniform() * (0.5 + 0.6 * (jitter - 1.0))) / 28.0;
  const double gain = 0.85 + rng.uniform() * 0.15;

  const double ct = std::cos(theta), st = std::sin(theta);
  auto map = [&](const Point& p) -> Point {
    const double x = p[0] - 0.5, y = p[1] - 0.5;
    return {0.5 + sx * (ct * x - st * y) + shear * y + tx,
            0.5 + sy * (st * x + ct * y) + ty};
  };

  std::array<double, 784> ink{};
  for (const auto& stroke : digit_glyphs()[std::size_t(digit)]) {
    for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
      const Point a = map(stroke[i]);
      const Point b = map(stroke[i + 1]);
      const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
      const int steps = std::max(2, int(std::ceil(len * 28.0 / 0.3)));
      for (int s = 0; s <= steps; ++s) {
        const double t = double(s) / steps;
        stamp(ink, a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), sigma);
      }
    }
  }
  for (int j = 0; j < 784; ++j) {
    const double noise = rng.gaussian() * 6.0;
    const double v = std::round(255.0 * gain * ink[std::size_t(j)] + noise);
    out[j] = std::clamp(v, 0.0, 255.0);
  }
}

}  // namespace

LabeledDataset synthetic_digits(Index per_class, std::uint64_t seed) {
  if (per_class < 1)
    throw std::invalid_argument("synthetic_digits: per_class must be positive");
  Rng rng(seed);
  LabeledDataset ds;
  ds.inputs.resize(10 * per_class, 784);
  ds.labels.resize(std::size_t(10 * per_class));
  ds.class_count = 10;
  std::array<double, 784> row;
  Index n = 0;
  for (int digit = 0; digit < 10; ++digit) {
    for (Index i = 0; i < per_class; ++i, ++n) {
      render_digit(digit, rng, row.data());
      for (Index j = 0; j < 784; ++j) ds.inputs(n, j) = row[std::size_t(j)];
      ds.labels[std::size_t(n)] = digit;
    }
  }
  return ds;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

LabeledDataset load_idx_pair(const std::string& dir, const std::string& images,
                             const std::string& labels) {
  const auto image_bytes = read_file(dir + "/" + images);
  const auto label_bytes = read_file(dir + "/" + labels);
  LabeledDataset ds = parse_idx(image_bytes, label_bytes);
  ds.class_count = std::max(ds.class_count, 10);
  return ds;
}

LabeledDataset load_cifar_files(const std::string& dir,
                                const std::vector<std::string>& files,
                                int class_count) {
  std::vector<std::uint8_t> all;
  for (const auto& f : files) {
    const auto bytes = read_file(dir + "/" + f);
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return parse_cifar(all, class_count);
}

}  // namespace

DatasetPair load_dataset(const DatasetSpec& spec) {
  DatasetPair pair;
  switch (spec.source) {
    case DataSource::kMnist:
    case DataSource::kFashionMnist:
      pair.train = load_idx_pair(spec.path, "train-images-idx3-ubyte",
                                 "train-labels-idx1-ubyte");
      pair.test = load_idx_pair(spec.path, "t10k-images-idx3-ubyte",
                                "t10k-labels-idx1-ubyte");
      break;
    case DataSource::kCifar10:
      pair.train = load_cifar_files(
          spec.path,
          {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
           "data_batch_4.bin", "data_batch_5.bin"},
          10);
      pair.test = load_cifar_files(spec.path, {"test_batch.bin"}, 10);
      break;
    case DataSource::kCifar100:
      pair.train = load_cifar_files(spec.path, {"train.bin"}, 100);
      pair.test = load_cifar_files(spec.path, {"test.bin"}, 100);
      break;
    case DataSource::kSynthetic:
      pair.train = synthetic_gaussian_mixture(spec.classes_total, spec.per_class,
                                              spec.dim, spec.separation, spec.seed);
      pair.test = synthetic_gaussian_mixture(
          spec.classes_total, std::max<Index>(spec.per_class / 5, 8), spec.dim,
          spec.separation, spec.seed ^ kSplitSeedMix);
      break;
    case DataSource::kDigits:
      pair.train = synthetic_digits(spec.per_class, spec.seed);
      pair.test = synthetic_digits(std::max<Index>(spec.per_class / 5, 8),
                                   spec.seed ^ kSplitSeedMix);
      break;
  }
  pair.train.split = Split::kTrain;
  pair.test.split = Split::kTest;

  if (!spec.class_subset.empty()) {
    pair.train = subset_classes(pair.train, spec.class_subset);
    pair.test = subset_classes(pair.test, spec.class_subset);
  }
  if (spec.train_cap > 0)
    pair.train = cap_samples(pair.train, spec.train_cap, spec.seed ^ 1);
  if (spec.test_cap > 0)
    pair.test = cap_samples(pair.test, spec.test_cap, spec.seed ^ 2);

  const FeatureStats stats = standardize_fit(pair.train);
  pair.train = standardize_apply(std::move(pair.train), stats);
  pair.test = standardize_apply(std::move(pair.test), stats);
  return pair;
}

}  // namespace ra::data
