#include "fitcap/records.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fitcap/errors.hpp"

namespace fitcap {

namespace fs = std::filesystem;

nlohmann::json optional_to_json(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

std::optional<double> optional_from_json(const nlohmann::json& v) {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

namespace {

nlohmann::json trace_to_json(const std::vector<double>& t) {
    auto out = nlohmann::json::array();
    for (double v : t) out.push_back(optional_to_json(v));
    return out;
}

std::vector<double> trace_from_json(const nlohmann::json& j) {
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.is_null() ? std::nan("") : v.get<double>());
    return out;
}

}  // namespace

std::string RunKey::id() const {
    char tau_text[32];
    std::snprintf(tau_text, sizeof tau_text, "%.6g", tau);
    std::ostringstream os;
    os << dataset << "__" << family << "__s" << seed << "__tau" << tau_text << "__" << config_hash;
    return os.str();
}

nlohmann::json RunRecord::to_json() const {
    auto per_class = nlohmann::json::array();
    for (const auto& v : per_class_accuracy) per_class.push_back(optional_to_json(v));
    return {{"schema_version", kRecordSchemaVersion},
            {"run_key",
             {{"dataset", key.dataset},
              {"family", key.family},
              {"seed", key.seed},
              {"tau", key.tau},
              {"config_hash", key.config_hash}}},
            {"test_accuracy", optional_to_json(test_accuracy)},
            {"per_class_accuracy", per_class},
            {"psi", psi},
            {"adapted_is", optional_to_json(adapted_is)},
            {"adapted_fid", optional_to_json(adapted_fid)},
            {"diff_is", optional_to_json(diff_is)},
            {"knn_accuracy", optional_to_json(knn_accuracy)},
            {"classifier_log", classifier_log.to_json()},
            {"generator_loss_trace", trace_to_json(generator_loss_trace)},
            {"generator_aux_trace", trace_to_json(generator_aux_trace)},
            {"generated_batches", generated_batches},
            {"real_batches", real_batches},
            {"generated_sample_repeats", generated_sample_repeats},
            {"failed", failed},
            {"generator_failed", generator_failed},
            {"failure_reasons", failure_reasons},
            {"wall_time_s", wall_time_s}};
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
    const int version = j.at("schema_version").get<int>();
    if (version != kRecordSchemaVersion) {
        throw FormatError("unsupported record schema version " + std::to_string(version));
    }
    RunRecord r;
    const auto& k = j.at("run_key");
    r.key = RunKey{k.at("dataset").get<std::string>(), k.at("family").get<std::string>(),
                   k.at("seed").get<std::uint64_t>(), k.at("tau").get<double>(),
                   k.at("config_hash").get<std::string>()};
    r.test_accuracy = optional_from_json(j.at("test_accuracy"));
    for (const auto& v : j.at("per_class_accuracy")) r.per_class_accuracy.push_back(optional_from_json(v));
    r.psi = j.at("psi").get<bool>();
    r.adapted_is = optional_from_json(j.at("adapted_is"));
    r.adapted_fid = optional_from_json(j.at("adapted_fid"));
    r.diff_is = optional_from_json(j.at("diff_is"));
    r.knn_accuracy = optional_from_json(j.at("knn_accuracy"));
    r.classifier_log = TrainingLog::from_json(j.at("classifier_log"));
    r.generator_loss_trace = trace_from_json(j.at("generator_loss_trace"));
    r.generator_aux_trace = trace_from_json(j.at("generator_aux_trace"));
    r.generated_batches = j.at("generated_batches").get<std::int64_t>();
    r.real_batches = j.at("real_batches").get<std::int64_t>();
    r.generated_sample_repeats = j.at("generated_sample_repeats").get<std::int64_t>();
    r.failed = j.at("failed").get<bool>();
    r.generator_failed = j.at("generator_failed").get<bool>();
    r.failure_reasons = j.at("failure_reasons").get<std::vector<std::string>>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    if (!r.failed && (!r.test_accuracy || *r.test_accuracy < 0.0 || *r.test_accuracy > 1.0)) {
        throw FormatError("record without failure flag must carry an accuracy in [0,1]");
    }
    return r;
}

fs::path records_dir(const fs::path& output_dir) { return output_dir / "records"; }

fs::path persist_record(const RunRecord& record, const fs::path& output_dir) {
    const auto dir = records_dir(output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const auto path = dir / (record.key.id() + ".json");
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << record.to_json().dump(2) << '\n';
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
    return path;
}

LoadedRecords load_records(const fs::path& output_dir) {
    LoadedRecords out;
    const auto dir = records_dir(output_dir);
    if (!fs::is_directory(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::map<std::string, fs::path> seen;
    for (const auto& file : files) {
        RunRecord r;
        try {
            std::ifstream in(file);
            r = RunRecord::from_json(nlohmann::json::parse(in));
        } catch (const std::exception& e) {
            out.warnings.push_back(file.string() + ": " + e.what());
            continue;
        }
        const auto id = r.key.id();
        if (auto it = seen.find(id); it != seen.end()) {
            throw ConsistencyError("duplicate run key " + id + " in " + it->second.string() + " and " +
                                   file.string());
        }
        seen.emplace(id, file);
        out.records.push_back(std::move(r));
    }
    return out;
}

}  // namespace fitcap
