#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "fitcap/dataset.hpp"
#include "fitcap/mixture.hpp"
#include "fitcap/networks.hpp"

namespace fitcap {

struct ClassifierConfig {
    std::string dataset_id = "mnist";  // mnist | fashion | synthetic
    int max_epochs = 200;
    int patience = 50;
    double learning_rate = 1e-3;
    int batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const;
    nets::ArchitectureId architecture() const { return nets::parse_architecture(dataset_id); }

    nlohmann::json to_json() const;
    static ClassifierConfig from_json(const nlohmann::json& j);
};

enum class StopReason { patience, max_epochs, failure };
std::string to_string(StopReason r);
StopReason parse_stop_reason(const std::string& s);

struct EpochLog {
    double train_loss = 0.0;
    double valid_accuracy = 0.0;
};

struct TrainingLog {
    std::vector<EpochLog> epochs;
    int stop_epoch = 0;       // 1-based, last epoch run
    int selected_epoch = 0;   // 1-based, best validation epoch (earliest on ties)
    double best_valid_accuracy = 0.0;
    StopReason stop_reason = StopReason::max_epochs;
    bool failed = false;
    std::string failure_reason;

    std::vector<double> valid_accuracy_trace() const;
    nlohmann::json to_json() const;
    static TrainingLog from_json(const nlohmann::json& j);
};

// Patience rule: stop once validation accuracy has gone `patience`
// consecutive epochs without a strict improvement, or at max_epochs.
class EarlyStopping {
public:
    EarlyStopping(int max_epochs, int patience);

    // Records one epoch; returns true if it is the new best.
    bool update(double valid_accuracy);
    bool should_stop() const;
    StopReason reason() const;

    int epochs_seen() const { return epoch_; }
    int best_epoch() const { return best_epoch_; }
    double best_value() const { return best_; }

private:
    int max_epochs_;
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    double best_ = -1.0;
};

// The generic loop behind train_classifier: `train_epoch` returns the mean
// training loss (non-finite marks a failure), `evaluate` returns validation
// accuracy, `on_best` fires whenever a new best epoch is recorded.
TrainingLog run_early_stopping(const ClassifierConfig& cfg, const std::function<double()>& train_epoch,
                               const std::function<double()>& evaluate, const std::function<void()>& on_best);

// ---------------------------------------------------------------------------
// TrainedClassifier: frozen proxy network in inference mode (dropout off).
// ---------------------------------------------------------------------------
class TrainedClassifier {
public:
    TrainedClassifier(nets::ArchitectureId arch, int num_classes, std::uint64_t init_seed);

    nets::ArchitectureId architecture() const { return arch_; }
    int num_classes() const { return num_classes_; }
    int selected_epoch() const { return selected_epoch_; }
    const std::vector<double>& valid_accuracy_trace() const { return valid_trace_; }
    std::int64_t feature_dim() const { return nets::feature_dim(arch_); }

    torch::Tensor log_probs(const torch::Tensor& x) const;
    torch::Tensor predict(const torch::Tensor& x) const;
    // Flattened layer-2 activations, (N, 320) for mnist / (N, 512) for fashion.
    torch::Tensor features(const torch::Tensor& x) const;

    nets::ProxyClassifier& network() { return net_; }
    void set_selection(int selected_epoch, std::vector<double> trace) {
        selected_epoch_ = selected_epoch;
        valid_trace_ = std::move(trace);
    }

private:
    void check_input(const torch::Tensor& x) const;

    nets::ArchitectureId arch_;
    int num_classes_;
    int selected_epoch_ = 0;
    std::vector<double> valid_trace_;
    mutable nets::ProxyClassifier net_;
};

struct ClassifierResult {
    TrainedClassifier classifier;
    TrainingLog log;
};

// One epoch is ceil(|D_train| / batch_size) batches from the mixture stream.
// Adam; weights restored to the best validation epoch.
ClassifierResult train_classifier(MixtureSampler& batches, const LabeledDataset& valid, const ClassifierConfig& cfg);

double evaluate_accuracy(const TrainedClassifier& clf, const LabeledDataset& data);
// std::nullopt marks classes absent from `data`.
std::vector<std::optional<double>> evaluate_per_class(const TrainedClassifier& clf, const LabeledDataset& data);

// Exact k-NN on flattened pixels (Euclidean). Equal distances resolve to the
// lowest train index; k > 1 votes, ties going to the label whose nearest
// member is closest. Inputs above `cap` points are thinned by a fixed stride.
double knn_accuracy(const LabeledDataset& train, const LabeledDataset& test, int k = 1,
                    std::int64_t cap = 10000);
LabeledDataset stride_subsample(const LabeledDataset& data, std::int64_t cap);

void save_classifier(const TrainedClassifier& clf, const ClassifierConfig& cfg, const std::filesystem::path& path);
TrainedClassifier load_classifier(const std::filesystem::path& path);

std::string classifier_checkpoint_name(const std::string& dataset, const std::string& model, std::uint64_t seed,
                                       double tau);

}  // namespace fitcap
