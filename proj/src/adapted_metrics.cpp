#include "fitcap/adapted_metrics.hpp"

#include <algorithm>

#include "fitcap/errors.hpp"

namespace fitcap {

namespace {

LabeledDataset head(const LabeledDataset& data, std::int64_t n) {
    if (data.size() < n) {
        throw ArgumentError("reference set has " + std::to_string(data.size()) + " samples, need " +
                            std::to_string(n));
    }
    return LabeledDataset{data.samples.narrow(0, 0, n), data.labels.narrow(0, 0, n), data.num_classes};
}

void check_fid_count(const TrainedClassifier& clf, std::int64_t n) {
    if (n < 2 * clf.feature_dim()) {
        throw ArgumentError("FID needs at least " + std::to_string(2 * clf.feature_dim()) + " samples, got " +
                            std::to_string(n));
    }
}

}  // namespace

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
    auto d = t.reshape({t.size(0), -1}).to(torch::kFloat64).contiguous();
    Eigen::MatrixXd out(d.size(0), d.size(1));
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    out = Eigen::Map<const RowMajor>(d.data_ptr<double>(), d.size(0), d.size(1));
    return out;
}

Eigen::MatrixXd class_probabilities(const TrainedClassifier& clf, const torch::Tensor& x) {
    // exp in double so rows sum to 1 to well within the IS tolerance.
    return to_eigen(clf.log_probs(x).to(torch::kFloat64).exp());
}

Eigen::MatrixXd feature_activations(const TrainedClassifier& clf, const LabeledDataset& data) {
    validate(data);
    return to_eigen(clf.features(data.samples));
}

double adapted_is(const TrainedGenerator& generator, const TrainedClassifier& eval_classifier,
                  std::int64_t n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw ArgumentError("IS needs n_samples >= 1");
    auto gen = sample_uniform(generator, n_samples, seed);
    return inception_score(class_probabilities(eval_classifier, gen.samples));
}

double adapted_fid(const TrainedGenerator& generator, const TrainedClassifier& eval_classifier,
                   const LabeledDataset& reference, std::int64_t n_samples, std::uint64_t seed) {
    check_fid_count(eval_classifier, n_samples);
    const auto ref = head(reference, n_samples);
    auto gen = sample_uniform(generator, n_samples, seed);
    return frechet_distance(moments_from_samples(feature_activations(eval_classifier, ref)),
                            moments_from_samples(feature_activations(eval_classifier, gen)));
}

double dataset_is(const TrainedClassifier& eval_classifier, const LabeledDataset& data) {
    validate(data);
    return inception_score(class_probabilities(eval_classifier, data.samples));
}

double dataset_fid(const TrainedClassifier& eval_classifier, const LabeledDataset& a, const LabeledDataset& b,
                   std::int64_t n_samples) {
    check_fid_count(eval_classifier, n_samples);
    return frechet_distance(moments_from_samples(feature_activations(eval_classifier, head(a, n_samples))),
                            moments_from_samples(feature_activations(eval_classifier, head(b, n_samples))));
}

}  // namespace fitcap
