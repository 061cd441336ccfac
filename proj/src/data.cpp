#include "vfl/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace vfl {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
// The validation carve-out is a dataset property, not part of an
// experiment's randomness, so its stream seed is a fixed constant.
constexpr std::uint64_t kSplitSeed = 0x6d6e697374ull;  // "mnist"

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>());
}

// Big-endian u32 with truncation diagnostics that name the byte offset.
std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path) {
  if (offset + 4 > bytes.size()) {
    throw std::runtime_error(path + ": truncated at byte offset " +
                             std::to_string(bytes.size()) + " (need " +
                             std::to_string(offset + 4) + " bytes)");
  }
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void require_payload(const std::vector<unsigned char>& bytes, std::size_t needed,
                     const std::string& path) {
  if (bytes.size() < needed) {
    throw std::runtime_error(path + ": truncated at byte offset " +
                             std::to_string(bytes.size()) + " (need " +
                             std::to_string(needed) + " bytes)");
  }
}

char hex_digit(unsigned v) { return "0123456789abcdef"[v & 0xF]; }

std::string hex32(std::uint32_t v) {
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += hex_digit((v >> shift) & 0xF);
  return s;
}

}  // namespace

void VerticalDataset::validate() const {
  if (train_blocks.empty()) throw std::invalid_argument("dataset has no feature blocks");
  auto check_split = [&](const std::vector<Matrix>& blocks, const std::vector<int>& labels,
                         const char* name) {
    if (blocks.size() != train_blocks.size()) {
      throw std::invalid_argument(std::string(name) + " split has wrong block count");
    }
    for (const Matrix& b : blocks) {
      if (b.rows != labels.size()) {
        throw std::invalid_argument(std::string(name) +
                                    " split: block rows do not match label count");
      }
    }
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
        throw std::invalid_argument(std::string(name) + " split: label out of range");
      }
    }
  };
  check_split(train_blocks, train_labels, "train");
  check_split(val_blocks, val_labels, "validation");
  check_split(test_blocks, test_labels, "test");
  for (std::size_t k = 0; k < clients(); ++k) {
    if (train_blocks[k].cols != val_blocks[k].cols ||
        train_blocks[k].cols != test_blocks[k].cols) {
      throw std::invalid_argument("block " + std::to_string(k) +
                                  " width differs across splits");
    }
  }
}

Matrix load_idx_images(const std::string& path) {
  const auto bytes = read_file(path);
  const std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != kImagesMagic) {
    throw std::runtime_error(path + ": bad magic " + hex32(magic) + " (want " +
                             hex32(kImagesMagic) + ")");
  }
  const std::uint32_t n = read_be32(bytes, 4, path);
  const std::uint32_t rows = read_be32(bytes, 8, path);
  const std::uint32_t cols = read_be32(bytes, 12, path);
  const std::size_t d = std::size_t(rows) * cols;
  require_payload(bytes, 16 + std::size_t(n) * d, path);
  Matrix out(n, d);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<double>(bytes[16 + i]) / 255.0;
  }
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  const auto bytes = read_file(path);
  const std::uint32_t magic = read_be32(bytes, 0, path);
  if (magic != kLabelsMagic) {
    throw std::runtime_error(path + ": bad magic " + hex32(magic) + " (want " +
                             hex32(kLabelsMagic) + ")");
  }
  const std::uint32_t n = read_be32(bytes, 4, path);
  require_payload(bytes, 8 + std::size_t(n), path);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = bytes[8 + i];
  return labels;
}

FlatData load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  FlatData data;
  data.features = load_idx_images(images_path);
  data.labels = load_idx_labels(labels_path);
  if (data.features.rows != data.labels.size()) {
    throw std::runtime_error("sample count mismatch: " + images_path + " has " +
                             std::to_string(data.features.rows) + " images, " +
                             labels_path + " has " + std::to_string(data.labels.size()) +
                             " labels");
  }
  return data;
}

VerticalDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n == 0 || spec.classes < 2) {
    throw std::invalid_argument("gen_synthetic: need n > 0 and at least 2 classes");
  }
  if (spec.informative_dims.empty() && spec.noise_dims.empty()) {
    throw std::invalid_argument("gen_synthetic: no feature blocks requested");
  }
  for (std::size_t d : spec.informative_dims) {
    if (d == 0) throw std::invalid_argument("gen_synthetic: zero-width informative block");
  }
  for (std::size_t d : spec.noise_dims) {
    if (d == 0) throw std::invalid_argument("gen_synthetic: zero-width noise block");
  }

  RngStream rng = derive_stream(seed, StreamPurpose::kSynthetic);
  const std::size_t n_val = spec.n_val > 0 ? spec.n_val : spec.n / 5;
  const std::size_t n_test = spec.n_test > 0 ? spec.n_test : spec.n / 5;
  const std::size_t blocks = spec.informative_dims.size() + spec.noise_dims.size();

  // Class means, informative blocks only, drawn first so the row loop below
  // is independent of how many rows each split has.
  std::vector<std::vector<double>> means(spec.informative_dims.size());
  for (std::size_t b = 0; b < spec.informative_dims.size(); ++b) {
    means[b].resize(spec.classes * spec.informative_dims[b]);
    for (double& m : means[b]) m = rng.normal(0.0, spec.mean_scale);
  }

  VerticalDataset out;
  out.num_classes = spec.classes;
  auto gen_split = [&](std::size_t rows, std::vector<Matrix>& dst_blocks,
                       std::vector<int>& dst_labels) {
    dst_blocks.clear();
    for (std::size_t b = 0; b < spec.informative_dims.size(); ++b) {
      dst_blocks.emplace_back(rows, spec.informative_dims[b]);
    }
    for (std::size_t b = 0; b < spec.noise_dims.size(); ++b) {
      dst_blocks.emplace_back(rows, spec.noise_dims[b]);
    }
    dst_labels.resize(rows);
    for (std::size_t j = 0; j < rows; ++j) {
      const std::size_t y = rng.next_below(spec.classes);
      dst_labels[j] = static_cast<int>(y);
      for (std::size_t b = 0; b < spec.informative_dims.size(); ++b) {
        const double* mu = means[b].data() + y * spec.informative_dims[b];
        for (std::size_t i = 0; i < spec.informative_dims[b]; ++i) {
          dst_blocks[b](j, i) = mu[i] + spec.noise_scale * rng.normal();
        }
      }
      for (std::size_t b = 0; b < spec.noise_dims.size(); ++b) {
        Matrix& block = dst_blocks[spec.informative_dims.size() + b];
        for (std::size_t i = 0; i < spec.noise_dims[b]; ++i) {
          block(j, i) = rng.normal();
        }
      }
    }
  };
  gen_split(spec.n, out.train_blocks, out.train_labels);
  gen_split(n_val, out.val_blocks, out.val_labels);
  gen_split(n_test, out.test_blocks, out.test_labels);

  // Standardize every column with training statistics.
  for (std::size_t b = 0; b < blocks; ++b) {
    Matrix& train = out.train_blocks[b];
    for (std::size_t col = 0; col < train.cols; ++col) {
      double mean = 0.0;
      for (std::size_t j = 0; j < train.rows; ++j) mean += train(j, col);
      mean /= static_cast<double>(train.rows);
      double var = 0.0;
      for (std::size_t j = 0; j < train.rows; ++j) {
        const double d = train(j, col) - mean;
        var += d * d;
      }
      const double stddev = std::max(std::sqrt(var / static_cast<double>(train.rows)), 1e-12);
      auto apply = [&](Matrix& m) {
        for (std::size_t j = 0; j < m.rows; ++j) m(j, col) = (m(j, col) - mean) / stddev;
      };
      apply(train);
      apply(out.val_blocks[b]);
      apply(out.test_blocks[b]);
    }
  }
  out.validate();
  return out;
}

std::vector<std::vector<std::size_t>> partition_columns(const PartitionScheme& scheme,
                                                        std::size_t d) {
  std::vector<std::vector<std::size_t>> owned;
  const std::size_t ch = scheme.image_channels;
  auto image_index = [&](std::size_t r, std::size_t c, std::size_t k) {
    return (r * scheme.image_cols + c) * ch + k;
  };

  switch (scheme.kind) {
    case PartitionKind::kRowBands: {
      if (scheme.clients == 0) throw std::invalid_argument("row-bands: zero clients");
      const std::size_t h = scheme.image_rows, w = scheme.image_cols;
      if (h * w * ch != d) {
        throw std::invalid_argument("row-bands: image geometry " + std::to_string(h) + "x" +
                                    std::to_string(w) + "x" + std::to_string(ch) +
                                    " does not cover " + std::to_string(d) + " dims");
      }
      if (scheme.clients > h) throw std::invalid_argument("row-bands: more clients than rows");
      for (std::size_t band = 0; band < scheme.clients; ++band) {
        std::size_t lo = band * h / scheme.clients;
        std::size_t hi = (band + 1) * h / scheme.clients;
        lo = lo > scheme.overlap ? lo - scheme.overlap : 0;
        hi = std::min(h, hi + scheme.overlap);
        std::vector<std::size_t> cols;
        for (std::size_t r = lo; r < hi; ++r) {
          for (std::size_t c = 0; c < w; ++c) {
            for (std::size_t k = 0; k < ch; ++k) cols.push_back(image_index(r, c, k));
          }
        }
        owned.push_back(std::move(cols));
      }
      break;
    }
    case PartitionKind::kPatches: {
      const std::size_t h = scheme.image_rows, w = scheme.image_cols;
      if (scheme.grid_rows == 0 || scheme.grid_cols == 0) {
        throw std::invalid_argument("patches: grid shape not set");
      }
      if (h * w * ch != d) {
        throw std::invalid_argument("patches: image geometry does not cover " +
                                    std::to_string(d) + " dims");
      }
      for (std::size_t gr = 0; gr < scheme.grid_rows; ++gr) {
        for (std::size_t gc = 0; gc < scheme.grid_cols; ++gc) {
          std::size_t r_lo = gr * h / scheme.grid_rows;
          std::size_t r_hi = (gr + 1) * h / scheme.grid_rows;
          std::size_t c_lo = gc * w / scheme.grid_cols;
          std::size_t c_hi = (gc + 1) * w / scheme.grid_cols;
          r_lo = r_lo > scheme.overlap ? r_lo - scheme.overlap : 0;
          r_hi = std::min(h, r_hi + scheme.overlap);
          c_lo = c_lo > scheme.overlap ? c_lo - scheme.overlap : 0;
          c_hi = std::min(w, c_hi + scheme.overlap);
          std::vector<std::size_t> cols;
          for (std::size_t r = r_lo; r < r_hi; ++r) {
            for (std::size_t c = c_lo; c < c_hi; ++c) {
              for (std::size_t k = 0; k < ch; ++k) cols.push_back(image_index(r, c, k));
            }
          }
          owned.push_back(std::move(cols));
        }
      }
      break;
    }
    case PartitionKind::kDimRanges: {
      if (scheme.ranges.empty()) throw std::invalid_argument("dim-ranges: no ranges");
      for (const auto& [begin, end] : scheme.ranges) {
        if (begin >= end || end > d) {
          throw std::invalid_argument("dim-ranges: bad range [" + std::to_string(begin) +
                                      ", " + std::to_string(end) + ") for d=" +
                                      std::to_string(d));
        }
        std::vector<std::size_t> cols;
        for (std::size_t i = begin; i < end; ++i) cols.push_back(i);
        owned.push_back(std::move(cols));
      }
      break;
    }
  }

  // Coverage check: every dimension exactly once, unless overlap was asked for.
  std::vector<std::size_t> hits(d, 0);
  for (const auto& cols : owned) {
    for (std::size_t c : cols) ++hits[c];
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (hits[i] == 0) {
      throw std::invalid_argument("partition leaves dimension " + std::to_string(i) +
                                  " uncovered");
    }
    if (hits[i] > 1 && scheme.overlap == 0 && scheme.kind != PartitionKind::kDimRanges) {
      throw std::invalid_argument("partition covers dimension " + std::to_string(i) +
                                  " more than once");
    }
    if (hits[i] > 1 && scheme.kind == PartitionKind::kDimRanges) {
      throw std::invalid_argument("dim-ranges cover dimension " + std::to_string(i) +
                                  " more than once");
    }
  }
  return owned;
}

std::vector<Matrix> partition_vertical(const Matrix& features,
                                       const PartitionScheme& scheme) {
  std::vector<Matrix> blocks;
  for (const auto& cols : partition_columns(scheme, features.cols)) {
    blocks.push_back(gather_cols(features, cols));
  }
  return blocks;
}

PartitionScheme scheme_from_block_dims(const std::vector<std::size_t>& dims) {
  PartitionScheme scheme;
  scheme.kind = PartitionKind::kDimRanges;
  std::size_t offset = 0;
  for (std::size_t d : dims) {
    scheme.ranges.emplace_back(offset, offset + d);
    offset += d;
  }
  return scheme;
}

std::vector<std::size_t> sample_batch(std::size_t n, std::size_t b, RngStream& rng) {
  if (b > n) {
    throw std::invalid_argument("sample_batch: batch " + std::to_string(b) +
                                " exceeds population " + std::to_string(n));
  }
  std::vector<std::size_t> perm = shuffled_indices(n, rng);
  perm.resize(b);
  return perm;
}

BatchSchedule::BatchSchedule(std::size_t n, std::size_t batch, std::uint64_t seed)
    : n_(n), batch_(batch), seed_(seed) {
  if (batch_ == 0 || batch_ > n_) {
    throw std::invalid_argument("BatchSchedule: batch " + std::to_string(batch_) +
                                " for population " + std::to_string(n_));
  }
  rounds_per_epoch_ = (n_ + batch_ - 1) / batch_;
}

BatchIndices BatchSchedule::batch_for_round(std::size_t round) {
  const std::size_t epoch = round / rounds_per_epoch_;
  const std::size_t slot = round % rounds_per_epoch_;
  if (epoch != cached_epoch_) {
    RngStream rng = derive_stream(seed_, StreamPurpose::kShuffle, epoch);
    permutation_ = shuffled_indices(n_, rng);
    cached_epoch_ = epoch;
  }
  const std::size_t lo = slot * batch_;
  const std::size_t hi = std::min(n_, lo + batch_);
  BatchIndices out;
  out.round = round;
  out.indices.assign(permutation_.begin() + lo, permutation_.begin() + hi);
  return out;
}

VerticalDataset load_mnist_vertical(const MnistPaths& paths, const PartitionScheme& scheme,
                                    std::size_t limit) {
  FlatData train = load_mnist_idx(paths.train_images, paths.train_labels);
  FlatData test = load_mnist_idx(paths.test_images, paths.test_labels);

  constexpr std::size_t kValidationRows = 6000;
  if (train.features.rows <= kValidationRows) {
    throw std::runtime_error("training file too small for the " +
                             std::to_string(kValidationRows) + "-row validation split");
  }
  RngStream split_rng = derive_stream(kSplitSeed, StreamPurpose::kDataSplit);
  const std::vector<std::size_t> order = shuffled_indices(train.features.rows, split_rng);
  std::vector<std::size_t> train_idx(order.begin(), order.end() - kValidationRows);
  std::vector<std::size_t> val_idx(order.end() - kValidationRows, order.end());
  if (limit > 0 && limit < train_idx.size()) train_idx.resize(limit);

  auto take = [&](const FlatData& src, const std::vector<std::size_t>& idx,
                  std::vector<Matrix>& dst_blocks, std::vector<int>& dst_labels) {
    dst_blocks = partition_vertical(gather_rows(src.features, idx), scheme);
    dst_labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) dst_labels[i] = src.labels[idx[i]];
  };

  VerticalDataset out;
  out.num_classes = 10;
  take(train, train_idx, out.train_blocks, out.train_labels);
  take(train, val_idx, out.val_blocks, out.val_labels);
  std::vector<std::size_t> all_test(test.features.rows);
  for (std::size_t i = 0; i < all_test.size(); ++i) all_test[i] = i;
  take(test, all_test, out.test_blocks, out.test_labels);
  out.validate();
  return out;
}

void write_features_csv(const std::string& path, const std::vector<Matrix>& blocks,
                        const std::vector<int>& labels) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path);
  std::size_t d = 0;
  for (const Matrix& b : blocks) d += b.cols;
  for (std::size_t i = 0; i < d; ++i) std::fprintf(f, "f%zu,", i);
  std::fprintf(f, "label\n");
  for (std::size_t j = 0; j < labels.size(); ++j) {
    for (const Matrix& b : blocks) {
      for (std::size_t c = 0; c < b.cols; ++c) std::fprintf(f, "%.17g,", b(j, c));
    }
    std::fprintf(f, "%d\n", labels[j]);
  }
  std::fclose(f);
}

}  // namespace vfl
