#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fitcap/classifier.hpp"

namespace fitcap {

inline constexpr int kRecordSchemaVersion = 1;
inline constexpr const char* kBaselineName = "BASELINE";

struct RunKey {
    std::string dataset;
    std::string family;  // manifest family name, or BASELINE for tau = 0
    std::uint64_t seed = 0;
    double tau = 0.0;
    std::string config_hash;

    // Stable textual identity, also used as the record file stem.
    std::string id() const;
    bool operator==(const RunKey&) const = default;
};

struct RunRecord {
    RunKey key;
    std::optional<double> test_accuracy;
    std::vector<std::optional<double>> per_class_accuracy;
    bool psi = false;  // tau == 1: test_accuracy is a fitting capacity
    std::optional<double> adapted_is;
    std::optional<double> adapted_fid;
    std::optional<double> diff_is;
    std::optional<double> knn_accuracy;

    TrainingLog classifier_log;
    std::vector<double> generator_loss_trace;
    std::vector<double> generator_aux_trace;
    std::int64_t generated_batches = 0;
    std::int64_t real_batches = 0;
    std::int64_t generated_sample_repeats = 0;  // single-use check over the whole run

    bool failed = false;
    bool generator_failed = false;
    std::vector<std::string> failure_reasons;
    double wall_time_s = 0.0;

    nlohmann::json to_json() const;
    static RunRecord from_json(const nlohmann::json& j);
};

// Atomic write (temp file, then rename) to <dir>/records/<key id>.json.
std::filesystem::path persist_record(const RunRecord& record, const std::filesystem::path& output_dir);

struct LoadedRecords {
    std::vector<RunRecord> records;
    std::vector<std::string> warnings;  // unreadable or corrupt files
};

// Reads every record under <dir>/records. Corrupt files become warnings;
// two records sharing a run key raise ConsistencyError.
LoadedRecords load_records(const std::filesystem::path& output_dir);

std::filesystem::path records_dir(const std::filesystem::path& output_dir);

// JSON helpers shared with reporting: non-finite or missing -> null.
nlohmann::json optional_to_json(const std::optional<double>& v);
std::optional<double> optional_from_json(const nlohmann::json& v);

}  // namespace fitcap
