#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vfl/matrix.hpp"
#include "vfl/rng.hpp"

namespace vfl {

// Un-partitioned feature table: one row per sample.
struct FlatData {
  Matrix features;
  std::vector<int> labels;
};

// Feature blocks vertically partitioned across M clients, aligned by row
// index: row j of every block (and labels[j]) describes the same sample.
// Immutable after construction; shared read-only across worker threads.
struct VerticalDataset {
  std::vector<Matrix> train_blocks;
  std::vector<int> train_labels;
  std::vector<Matrix> val_blocks;
  std::vector<int> val_labels;
  std::vector<Matrix> test_blocks;
  std::vector<int> test_labels;
  std::size_t num_classes = 0;

  std::size_t clients() const { return train_blocks.size(); }
  std::size_t n_train() const { return train_labels.size(); }
  std::size_t n_val() const { return val_labels.size(); }
  std::size_t n_test() const { return test_labels.size(); }
  std::size_t block_dim(std::size_t k) const { return train_blocks[k].cols; }
  void validate() const;  // row alignment, label range, block count consistency
};

// IDX format (big-endian): magic 0x00000803 for images, 0x00000801 for
// labels. Pixels are scaled by 1/255. Errors name the byte offset at which
// a file came up short.
Matrix load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);
// Loads one (images, labels) pair and cross-checks the sample counts.
FlatData load_mnist_idx(const std::string& images_path, const std::string& labels_path);

struct SyntheticSpec {
  std::size_t n = 0;            // training rows
  std::size_t classes = 2;
  std::vector<std::size_t> informative_dims;  // one entry per informative block
  std::vector<std::size_t> noise_dims;        // one entry per label-independent block
  double noise_scale = 1.0;  // stddev of the noise added around class means
  double mean_scale = 2.0;   // stddev of the class-mean draw
  std::size_t n_val = 0;     // 0 → n/5
  std::size_t n_test = 0;    // 0 → n/5
};

// Informative blocks: class-dependent Gaussian means + noise_scale·N(0,1).
// Noise blocks: pure N(0,1), label-independent. All columns standardized
// with training-split statistics. Deterministic per seed.
VerticalDataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

enum class PartitionKind { kRowBands, kPatches, kDimRanges };

struct PartitionScheme {
  PartitionKind kind = PartitionKind::kRowBands;
  std::size_t clients = 1;        // row-bands band count
  std::size_t image_rows = 28;    // image geometry for row-bands / patches
  std::size_t image_cols = 28;
  std::size_t image_channels = 1;
  std::size_t grid_rows = 0;      // patches grid
  std::size_t grid_cols = 0;
  std::size_t overlap = 0;        // extra rows (bands) / pixels (patches) per side
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // dim-ranges [begin,end)
};

// Column indices owned by each client. Feature index layout for image
// schemes is (row·width + col)·channels + channel. With overlap disabled
// the per-client sets must tile [0,d) exactly; uncovered or doubly covered
// dimensions are an error.
std::vector<std::vector<std::size_t>> partition_columns(const PartitionScheme& scheme,
                                                        std::size_t d);
std::vector<Matrix> partition_vertical(const Matrix& features,
                                       const PartitionScheme& scheme);

// Convenience: a dim-ranges scheme with the given consecutive block widths.
PartitionScheme scheme_from_block_dims(const std::vector<std::size_t>& dims);

// One uniform draw of b indices without replacement.
std::vector<std::size_t> sample_batch(std::size_t n, std::size_t b, RngStream& rng);

struct BatchIndices {
  std::size_t round = 0;
  std::vector<std::size_t> indices;
};

// Shuffled-epoch schedule: [0,N) is reshuffled once per epoch (stream
// derived from seed and epoch number) and sliced into consecutive chunks of
// size b; one epoch spans ⌈N/b⌉ rounds, the last chunk possibly short.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t n, std::size_t batch, std::uint64_t seed);
  std::size_t rounds_per_epoch() const { return rounds_per_epoch_; }
  BatchIndices batch_for_round(std::size_t round);

 private:
  std::size_t n_, batch_, rounds_per_epoch_;
  std::uint64_t seed_;
  std::size_t cached_epoch_ = static_cast<std::size_t>(-1);
  std::vector<std::size_t> permutation_;
};

// MNIST assembly: 60000-row train file shuffled by a fixed named stream
// (independent of the experiment seed), last 6000 rows → validation; the
// official test pair is the test split. limit > 0 truncates the remaining
// training rows to the first `limit`.
struct MnistPaths {
  std::string train_images, train_labels, test_images, test_labels;
};
VerticalDataset load_mnist_vertical(const MnistPaths& paths,
                                    const PartitionScheme& scheme,
                                    std::size_t limit = 0);

// Synthetic export, header `f0,...,f{d-1},label`, training split only.
void write_features_csv(const std::string& path, const std::vector<Matrix>& blocks,
                        const std::vector<int>& labels);

}  // namespace vfl
