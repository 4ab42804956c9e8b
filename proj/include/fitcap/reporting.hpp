#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fitcap/metrics.hpp"
#include "fitcap/records.hpp"

namespace fitcap {

inline constexpr const char* kBaselineLabel = "Baseline";

struct ModelPsi {
    std::string model;
    std::optional<ScoreSummary> summary;  // empty when every tau = 1 run failed
    std::size_t runs = 0;
    std::size_t failed_runs = 0;
    std::vector<std::string> failure_notes;  // "seed 3: generator: non-finite loss ..."

    bool all_failed() const { return !summary.has_value(); }
};

struct TauPoint {
    std::string model;
    double tau = 0.0;
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;  // sample std, 0 for a single value
    double min = 0.0;
    double max = 0.0;
};

struct ClassRelative {
    std::string model;
    std::vector<double> mean;  // per class; NaN where no seed had the class
    std::vector<double> std;
    std::vector<std::size_t> n;
};

struct ComparisonRow {
    std::string model;
    std::optional<double> psi, is, fid;
    std::optional<double> psi_z, is_z, fid_z;
};

struct MetricReport {
    std::string dataset;
    std::size_t record_count = 0;
    std::string store_hash;  // over the sorted run keys
    ModelPsi baseline;       // tau = 0 accuracies
    std::vector<ModelPsi> families;
    std::vector<TauPoint> accuracy_vs_tau;
    std::vector<TauPoint> knn_vs_tau;
    std::vector<ClassRelative> per_class;
    std::vector<ComparisonRow> comparison;
    std::vector<std::string> notes;
};

// Pure aggregation; every statistic comes from the metrics module.
MetricReport build_report(const std::vector<RunRecord>& records);

struct PlotTheme {
    int version = 1;
    int width = 900;
    int height = 600;
    int margin_left = 90, margin_right = 200, margin_top = 60, margin_bottom = 70;
    double font_scale = 0.5;
    int line_thickness = 2;
    std::vector<std::array<int, 3>> palette;  // BGR
    std::array<int, 3> failure_color{0, 0, 220};

    static PlotTheme defaults();
    nlohmann::json to_json() const;
    static PlotTheme from_json(const nlohmann::json& j);
};

// Writes CSV tables, PNG figures, theme.json and index.md into
// <output_dir>/report/ and returns the written paths.
std::vector<std::filesystem::path> render_report(const MetricReport& report, const std::filesystem::path& output_dir,
                                                 const PlotTheme& theme = PlotTheme::defaults());

// Number formatting used by every CSV: shortest round-trip form.
std::string format_number(double v);

}  // namespace fitcap
