// fitcap: command-line front end for sweeps, reports and one-off metrics.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fitcap/adapted_metrics.hpp"
#include "fitcap/errors.hpp"
#include "fitcap/harness.hpp"
#include "fitcap/log.hpp"
#include "fitcap/reporting.hpp"

namespace {

using namespace fitcap;

int cmd_run(const std::string& config, int workers, bool strict, bool report) {
    auto manifest = load_manifest(config);
    if (workers > 0) manifest.parallel_workers = workers;
    if (strict) manifest.strict = true;
    const auto summary = run_experiment(manifest);
    std::size_t failed = 0;
    for (const auto& r : summary.records) failed += r.failed ? 1 : 0;
    for (const auto& w : summary.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "records: " << summary.records.size() << " (expected " << manifest.expected_records()
              << "), new: " << summary.trained << ", reused: " << summary.reused << ", failed: " << failed << '\n';
    if (report && !summary.records.empty()) {
        render_report(build_report(summary.records), manifest.output_dir);
        std::cout << "report: " << (manifest.output_dir / "report" / "index.md").string() << '\n';
    }
    return 0;
}

int cmd_report(const std::string& results, const std::string& theme_path) {
    const auto loaded = load_records(results);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
    auto theme = PlotTheme::defaults();
    if (!theme_path.empty()) {
        std::ifstream in(theme_path);
        if (!in) throw IoError("cannot open theme " + theme_path);
        theme = PlotTheme::from_json(nlohmann::json::parse(in));
    }
    const auto files = render_report(build_report(loaded.records), results, theme);
    std::cout << "wrote " << files.size() << " files under " << results << "/report\n";
    return 0;
}

int cmd_metrics(const std::string& generator_path, const std::string& classifier_path, const std::string& images,
                const std::string& labels, std::int64_t n_samples, std::uint64_t seed) {
    const auto generator = load_generator(generator_path);
    const auto classifier = load_classifier(classifier_path);
    nlohmann::json out;
    out["adapted_is"] = adapted_is(*generator, classifier, n_samples, seed);
    out["generator_failed"] = generator->status().failed;
    if (!images.empty()) {
        const auto reference = load_idx(images, labels, generator->num_classes());
        const auto n = std::min(n_samples, reference.size());
        out["adapted_fid"] = adapted_fid(*generator, classifier, reference, n, seed);
        const auto is_ref = dataset_is(classifier, reference);
        out["reference_is"] = is_ref;
        out["diff_is"] = diff_is(out["adapted_is"].get<double>(), is_ref);
        out["fid_samples"] = n;
    }
    std::cout << out.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fitcap: score conditional generative models by the accuracy of a classifier trained on their samples"};
    app.require_subcommand(1);
    bool quiet = false, verbose = false;
    app.add_flag("-q,--quiet", quiet, "Only print results");
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    auto* run = app.add_subcommand("run", "Run (or resume) the sweep described by a manifest");
    std::string config;
    int workers = 0;
    bool strict = false, with_report = false;
    run->add_option("-c,--config", config, "Manifest (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("-j,--workers", workers, "Override parallel_workers");
    run->add_flag("--strict", strict, "Single worker, single thread");
    run->add_flag("--report", with_report, "Render the report when the sweep finishes");

    auto* report = app.add_subcommand("report", "Render tables and figures from a results directory");
    std::string results, theme;
    report->add_option("-r,--results", results, "Results directory (the manifest output_dir)")
        ->required()
        ->check(CLI::ExistingDirectory);
    report->add_option("--theme", theme, "Plot theme JSON")->check(CLI::ExistingFile);

    auto* metrics = app.add_subcommand("metrics", "Adapted IS / FID for one generator checkpoint");
    std::string gen_path, clf_path, images, labels;
    std::int64_t n_samples = 10000;
    std::uint64_t seed = 0;
    metrics->add_option("-g,--generator", gen_path, "Generator checkpoint")->required()->check(CLI::ExistingFile);
    metrics->add_option("-k,--classifier", clf_path, "Evaluation classifier checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    auto* img_opt = metrics->add_option("--images", images, "Reference IDX images (enables FID)")
                        ->check(CLI::ExistingFile);
    metrics->add_option("--labels", labels, "Reference IDX labels")->check(CLI::ExistingFile)->needs(img_opt);
    img_opt->needs(metrics->get_option("--labels"));
    metrics->add_option("-n,--n-samples", n_samples, "Generated samples")->check(CLI::PositiveNumber);
    metrics->add_option("--seed", seed, "Sampling seed");

    CLI11_PARSE(app, argc, argv);
    if (quiet) fitcap::log::set_level(fitcap::log::Level::quiet);
    if (verbose) fitcap::log::set_level(fitcap::log::Level::debug);

    try {
        if (*run) return cmd_run(config, workers, strict, with_report);
        if (*report) return cmd_report(results, theme);
        if (*metrics) return cmd_metrics(gen_path, clf_path, images, labels, n_samples, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
