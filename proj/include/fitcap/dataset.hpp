#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace fitcap {

// ---------------------------------------------------------------------------
// LabeledDataset: the data currency of every module.
//
//   samples  float32 tensor (N, C, H, W), values in [0, 1]
//   labels   int64 tensor (N), values in {0..K-1}
//
// Tensors are treated as immutable once a dataset is built; subsets copy.
// ---------------------------------------------------------------------------
struct LabeledDataset {
    torch::Tensor samples;
    torch::Tensor labels;
    int num_classes = 0;

    std::int64_t size() const { return labels.defined() ? labels.size(0) : 0; }
    bool empty() const { return size() == 0; }

    // Shape of a single sample, i.e. samples.sizes() without the leading N.
    std::vector<std::int64_t> sample_shape() const;
    std::int64_t sample_numel() const;

    LabeledDataset subset(const std::vector<std::int64_t>& indices) const;
    LabeledDataset subset(const torch::Tensor& indices) const;
    LabeledDataset class_subset(int label) const;
    std::vector<std::int64_t> class_counts() const;
};

struct DatasetSplits {
    LabeledDataset train;
    LabeledDataset valid;
    LabeledDataset test;
};

// Throws ArgumentError naming the first violated invariant. `allow_empty`
// admits N = 0, which only sampling with an empty label list produces.
void validate(const LabeledDataset& data, bool allow_empty = false);

LabeledDataset make_dataset(torch::Tensor samples, torch::Tensor labels, int num_classes);

// IDX (MNIST distribution format): big-endian u32 magic, big-endian u32
// dims, unsigned-byte payload. Pixels are scaled by 1/255.
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path,
                        int num_classes = 10);

// Inverse of load_idx, quantizing to round(255 * v).
void write_idx(const LabeledDataset& data,
               const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

struct SplitIndices {
    std::vector<std::int64_t> train;
    std::vector<std::int64_t> valid;
};

// Uniform (non-stratified) shuffle under `seed`, then the first
// `valid_count` shuffled indices become the validation set.
SplitIndices split_indices(std::int64_t n, std::int64_t valid_count, std::uint64_t seed);

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& source,
                                                        std::int64_t valid_count,
                                                        std::uint64_t seed);

struct SyntheticSpec {
    int num_classes = 10;
    int dims = 784;
    int per_class = 100;
    double noise_std = 0.1;
    // Class means are drawn uniformly from [mean_low, mean_high]^dims.
    double mean_low = 0.15;
    double mean_high = 0.85;
};

// Isotropic Gaussian class clusters, clipped into [0,1], m samples per class
// in class-major order. dims == 784 is laid out as (1, 28, 28) so the image
// classifiers accept it; other dims become (1, 1, dims).
LabeledDataset make_synthetic_gaussian(int num_classes, int dims, int per_class,
                                       std::uint64_t seed);
LabeledDataset make_synthetic_gaussian(const SyntheticSpec& spec, std::uint64_t seed);

// Synthetic train/test pair sharing the same class means.
std::pair<LabeledDataset, LabeledDataset> make_synthetic_pair(const SyntheticSpec& spec,
                                                              int test_per_class,
                                                              std::uint64_t seed);

}  // namespace fitcap
