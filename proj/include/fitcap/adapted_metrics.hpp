#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <torch/torch.h>

#include "fitcap/classifier.hpp"
#include "fitcap/dataset.hpp"
#include "fitcap/generative.hpp"
#include "fitcap/metrics.hpp"

namespace fitcap {

// Conversions from float tensors to double Eigen matrices (row-major copy).
Eigen::MatrixXd to_eigen(const torch::Tensor& t);

// Softmax outputs of the evaluation classifier, as a probability matrix.
Eigen::MatrixXd class_probabilities(const TrainedClassifier& clf, const torch::Tensor& x);
// Flattened layer-2 activations, (N, d_feat).
Eigen::MatrixXd feature_activations(const TrainedClassifier& clf, const LabeledDataset& data);

// IS of the evaluation classifier over n generated images with uniform labels.
double adapted_is(const TrainedGenerator& generator, const TrainedClassifier& eval_classifier,
                  std::int64_t n_samples, std::uint64_t seed);

// FID between layer-2 features of the first n reference samples and of n
// generated ones. Requires n >= 2 * d_feat.
double adapted_fid(const TrainedGenerator& generator, const TrainedClassifier& eval_classifier,
                   const LabeledDataset& reference, std::int64_t n_samples, std::uint64_t seed);

// Reference values: IS of the classifier on `data` itself, and FID between
// two real datasets (train vs test).
double dataset_is(const TrainedClassifier& eval_classifier, const LabeledDataset& data);
double dataset_fid(const TrainedClassifier& eval_classifier, const LabeledDataset& a, const LabeledDataset& b,
                   std::int64_t n_samples);

}  // namespace fitcap
