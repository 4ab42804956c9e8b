#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fitcap/classifier.hpp"
#include "fitcap/dataset.hpp"
#include "fitcap/generative.hpp"
#include "fitcap/records.hpp"

namespace fitcap {

struct DatasetConfig {
    std::string id = "mnist";  // mnist | fashion | synthetic
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    int num_classes = 10;
    std::int64_t valid_count = 5000;
    std::optional<std::int64_t> train_limit;  // keep the first N of the training file
    std::optional<std::int64_t> test_limit;
    SyntheticSpec synthetic;
    int synthetic_test_per_class = 100;
    std::uint64_t synthetic_seed = 0;

    nlohmann::json to_json() const;
};

struct FamilyEntry {
    std::string name;  // label used in keys and reports
    Family family = Family::VAE;
    nlohmann::json overrides = nlohmann::json::object();  // GeneratorConfig fields
};

struct MetricsConfig {
    bool enabled = true;
    std::int64_t n_samples = 10000;
    bool knn = false;
    std::int64_t knn_cap = 10000;

    nlohmann::json to_json() const;
};

struct ExperimentManifest {
    DatasetConfig dataset;
    std::vector<FamilyEntry> families;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<double> tau_grid{0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875, 1.0};
    nlohmann::json generator = nlohmann::json::object();  // shared GeneratorConfig overrides
    ClassifierConfig classifier;
    MetricsConfig metrics;
    std::filesystem::path output_dir = "results";
    int parallel_workers = 1;
    bool strict = false;  // single worker, single intra-op thread
    bool save_checkpoints = true;

    void validate() const;
    // Relative paths resolve against `base_dir`.
    static ExperimentManifest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    nlohmann::json to_json() const;

    GeneratorConfig generator_config(const FamilyEntry& entry, std::uint64_t seed) const;
    ClassifierConfig classifier_config(std::uint64_t seed) const;
    std::string baseline_hash() const;
    std::string family_hash(const FamilyEntry& entry) const;
    // Number of records a complete sweep produces.
    std::size_t expected_records() const;
};

ExperimentManifest load_manifest(const std::filesystem::path& path);

// Train / valid / test for one seed (the validation split depends on the seed).
DatasetSplits load_splits(const DatasetConfig& cfg, std::uint64_t seed);

struct SweepSummary {
    std::vector<RunRecord> records;  // every record of the manifest, loaded or new
    std::size_t trained = 0;         // records produced by this invocation
    std::size_t reused = 0;          // records found in the store
    std::vector<std::string> warnings;
};

struct SweepHooks {
    // Called after each record is persisted.
    std::function<void(const RunRecord&)> on_record;
};

// Baselines (one per seed, shared by every family), then per (family, seed)
// a generator followed by one classifier per tau > 0. Existing records are
// reused by run key; run failures are recorded, never thrown.
SweepSummary run_experiment(const ExperimentManifest& manifest, const SweepHooks& hooks = {});

}  // namespace fitcap
