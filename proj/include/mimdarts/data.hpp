#pragma once

#include "mimdarts/rng.hpp"
#include "mimdarts/tensor.hpp"

#include <string>
#include <vector>

namespace mimdarts {

/// In-memory dataset. Pixels are kept in raw [0,1] form; standardization is
/// applied at batch assembly so the binary round-trip stays bit-exact.
struct ImageDataset {
  int num_classes = 0;
  int C = 0, H = 0, W = 0;
  std::vector<float> images;  // [n, C, H, W], values in [0,1]
  std::vector<int> labels;

  // Standardization constants, computed from a training index set.
  std::vector<float> channel_mean;  // size C
  std::vector<float> channel_std;   // size C
  float norm_lo = 0.f;              // min/max of the standardized training data,
  float norm_hi = 0.f;              // used as the HardTanh interval

  int64_t size() const { return int64_t(labels.size()); }
  int64_t image_len() const { return int64_t(C) * H * W; }

  /// Populate channel_mean/std and the normalized range from these samples.
  void compute_stats(const std::vector<int>& indices);
};

struct DatasetMeta {
  int num_classes = 10;
  int H = 32, W = 32, C = 3;
};

/// CIFAR binary records: 1 label byte + C*H*W pixel bytes, channel-planar,
/// row-major. Pixel p maps to p/255.
ImageDataset load_cifar_binary(const std::string& path, const DatasetMeta& meta);
void write_cifar_binary(const ImageDataset& ds, const std::string& path);

DatasetMeta load_meta_sidecar(const std::string& path);
void write_meta_sidecar(const DatasetMeta& meta, const std::string& path);

struct SyntheticSpec {
  int num_classes = 10;
  int n = 4000;
  int H = 32, W = 32, C = 3;
  uint64_t seed = 0;
  float noise_std = 0.1f;
  float phase_jitter = 1.0f;  // fraction of a full period; 0 = deterministic templates
  float freq_base = 2.0f;     // cycles across the image for the lowest-frequency class
};

/// Class-conditional oriented gratings plus noise; learnable by a small CNN,
/// not by a linear probe when phases are randomized.
ImageDataset make_synthetic(const SyntheticSpec& spec);

struct SplitPlan {
  uint64_t seed = 0;
  std::vector<int> search_train;
  std::vector<int> search_val;
  std::vector<int> eval_train;
  std::vector<int> eval_test;

  void validate(int64_t n) const;  // disjoint permutation-partition of [0,n)
};

/// Shuffled partition with the given fractions (eval_test gets the remainder).
SplitPlan make_split_plan(int64_t n, double f_search_train, double f_search_val,
                          double f_eval_train, uint64_t seed);

enum class SplitTag { kSearchTrain, kSearchVal, kEvalTrain, kEvalTest };

struct Batch {
  Tensor images;  // standardized [B,C,H,W]
  std::vector<int> labels;
  SplitTag tag;
};

/// Deterministic shuffled mini-batches (drop-last). Augmentation = zero-pad-4
/// random crop + horizontal flip, applied before standardization.
class BatchStream {
 public:
  BatchStream(const ImageDataset& ds, std::vector<int> indices, int batch_size, SplitTag tag,
              bool shuffle, bool augment, uint64_t seed);

  /// Reset order for an epoch; batch order depends only on (seed, epoch).
  void start_epoch(int epoch);
  int batches_per_epoch() const { return int(indices_.size()) / batch_size_; }
  bool next(Batch& out);

 private:
  const ImageDataset& ds_;
  std::vector<int> indices_;
  std::vector<int> order_;
  int batch_size_;
  SplitTag tag_;
  bool shuffle_, augment_;
  uint64_t seed_;
  int cursor_ = 0;
  Rng rng_;
};

/// Standardized (optionally augmented) batch for an explicit index list.
Batch assemble_batch(const ImageDataset& ds, const std::vector<int>& indices, SplitTag tag,
                     bool augment, Rng& rng);

}  // namespace mimdarts
