#include "fitcap/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include "fitcap/adapted_metrics.hpp"
#include "fitcap/errors.hpp"
#include "fitcap/log.hpp"
#include "fitcap/mixture.hpp"
#include "fitcap/seeding.hpp"

namespace fitcap {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string hash_json(const nlohmann::json& j) { return hex64(fnv1a64(j.dump())); }

template <class T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

DatasetConfig dataset_from_json(const nlohmann::json& j, const fs::path& base) {
    DatasetConfig d;
    d.id = j.value("id", d.id);
    const fs::path dir = resolve(j.value("dir", std::string{}), base);
    auto file = [&](const char* key, const char* standard) {
        if (j.contains(key)) return resolve(j.at(key).get<std::string>(), base);
        return dir.empty() ? fs::path{} : dir / standard;
    };
    d.train_images = file("train_images", "train-images-idx3-ubyte");
    d.train_labels = file("train_labels", "train-labels-idx1-ubyte");
    d.test_images = file("test_images", "t10k-images-idx3-ubyte");
    d.test_labels = file("test_labels", "t10k-labels-idx1-ubyte");
    d.num_classes = j.value("num_classes", d.num_classes);
    d.valid_count = j.value("valid_count", d.valid_count);
    d.train_limit = optional_field<std::int64_t>(j, "train_limit");
    d.test_limit = optional_field<std::int64_t>(j, "test_limit");
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        d.synthetic.num_classes = s.value("num_classes", d.synthetic.num_classes);
        d.synthetic.dims = s.value("dims", d.synthetic.dims);
        d.synthetic.per_class = s.value("per_class", d.synthetic.per_class);
        d.synthetic.noise_std = s.value("noise_std", d.synthetic.noise_std);
        d.synthetic.mean_low = s.value("mean_low", d.synthetic.mean_low);
        d.synthetic.mean_high = s.value("mean_high", d.synthetic.mean_high);
        d.synthetic_test_per_class = s.value("test_per_class", d.synthetic_test_per_class);
        d.synthetic_seed = s.value("seed", d.synthetic_seed);
    }
    if (d.id == "synthetic") d.num_classes = d.synthetic.num_classes;
    return d;
}

// Raw train/test pair before the per-seed validation split.
struct SourceData {
    LabeledDataset train;
    LabeledDataset test;
};

LabeledDataset head(const LabeledDataset& d, std::optional<std::int64_t> limit) {
    if (!limit || *limit >= d.size()) return d;
    return LabeledDataset{d.samples.narrow(0, 0, *limit).clone(), d.labels.narrow(0, 0, *limit).clone(),
                          d.num_classes};
}

SourceData load_source(const DatasetConfig& cfg) {
    SourceData src;
    if (cfg.id == "synthetic") {
        auto [train, test] = make_synthetic_pair(cfg.synthetic, cfg.synthetic_test_per_class, cfg.synthetic_seed);
        src.train = std::move(train);
        src.test = std::move(test);
    } else {
        for (const auto& p : {cfg.train_images, cfg.train_labels, cfg.test_images, cfg.test_labels}) {
            if (p.empty() || !fs::exists(p)) throw IoError("dataset file not found: " + p.string());
        }
        src.train = load_idx(cfg.train_images, cfg.train_labels, cfg.num_classes);
        src.test = load_idx(cfg.test_images, cfg.test_labels, cfg.num_classes);
    }
    src.train = head(src.train, cfg.train_limit);
    src.test = head(src.test, cfg.test_limit);
    return src;
}

DatasetSplits split_source(const SourceData& src, const DatasetConfig& cfg, std::uint64_t seed) {
    auto [train, valid] = split_dataset(src.train, cfg.valid_count, derive_seed(seed, "split"));
    return DatasetSplits{std::move(train), std::move(valid), src.test};
}

// Runs fn(i) for i in [0, n) on `workers` threads; fn must not throw.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    for (std::size_t w = 0; w < count; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Counts generated samples whose exact bytes were already seen in this run.
class SingleUseCheck {
public:
    void observe(const Batch& b) {
        if (!b.generated) return;
        auto x = b.samples.contiguous();
        const auto n = x.size(0);
        const auto stride = x.numel() / std::max<std::int64_t>(n, 1);
        const auto* bytes = reinterpret_cast<const char*>(x.data_ptr<float>());
        for (std::int64_t i = 0; i < n; ++i) {
            const auto h = fnv1a64(std::string_view(bytes + i * stride * 4, static_cast<std::size_t>(stride * 4)));
            if (!seen_.insert(h).second) ++repeats_;
        }
    }
    std::int64_t repeats() const { return repeats_; }

private:
    std::unordered_set<std::uint64_t> seen_;
    std::int64_t repeats_ = 0;
};

class Sweep {
public:
    Sweep(const ExperimentManifest& m, const SweepHooks& hooks) : m_(m), hooks_(hooks) {}

    SweepSummary run();

private:
    const DatasetSplits& splits(std::uint64_t seed);
    void finish(RunRecord rec);
    bool have(const RunKey& key) const { return existing_.count(key.id()) > 0; }
    fs::path checkpoint_dir() const { return m_.output_dir / "checkpoints"; }

    void run_baseline(std::uint64_t seed);
    std::shared_ptr<TrainedClassifier> baseline_classifier(std::uint64_t seed);
    void compute_reference_metrics();
    void run_family(const FamilyEntry& entry, std::uint64_t seed);
    GeneratorPtr obtain_generator(const FamilyEntry& entry, std::uint64_t seed, const LabeledDataset& train);
    RunRecord train_and_score(RunKey key, const DatasetSplits& data, GeneratorPtr generator, double tau,
                              std::uint64_t seed);

    const ExperimentManifest& m_;
    const SweepHooks& hooks_;
    SourceData source_;
    std::map<std::string, RunRecord> existing_;

    std::mutex mu_;
    std::map<std::uint64_t, std::shared_ptr<DatasetSplits>> splits_;
    std::map<std::uint64_t, std::shared_ptr<TrainedClassifier>> baselines_;
    std::vector<RunRecord> fresh_;
    std::vector<std::string> warnings_;

    std::shared_ptr<TrainedClassifier> eval_classifier_;
    std::optional<double> is_test_;
    std::optional<double> fid_train_test_;
};

const DatasetSplits& Sweep::splits(std::uint64_t seed) {
    std::lock_guard lock(mu_);
    auto& slot = splits_[seed];
    if (!slot) slot = std::make_shared<DatasetSplits>(split_source(source_, m_.dataset, seed));
    return *slot;
}

void Sweep::finish(RunRecord rec) {
    persist_record(rec, m_.output_dir);
    log::info("record ", rec.key.id(), rec.test_accuracy ? " acc " + std::to_string(*rec.test_accuracy) : "",
              rec.failed ? " [FAILED]" : "");
    if (hooks_.on_record) hooks_.on_record(rec);
    std::lock_guard lock(mu_);
    fresh_.push_back(std::move(rec));
}

RunRecord Sweep::train_and_score(RunKey key, const DatasetSplits& data, GeneratorPtr generator, double tau,
                                 std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.key = std::move(key);
    rec.psi = tau == 1.0;
    try {
        const auto ccfg = m_.classifier_config(seed);
        const MixtureConfig mcfg{tau, ccfg.batch_size, derive_seed(seed, "mixture")};
        MixtureSampler sampler(data.train, generator, mcfg);
        SingleUseCheck single_use;
        sampler.set_observer([&](const Batch& b) { single_use.observe(b); });
        auto result = train_classifier(sampler, data.valid, ccfg);
        rec.classifier_log = result.log;
        rec.generated_batches = sampler.generated_batches();
        rec.real_batches = sampler.real_batches();
        rec.generated_sample_repeats = single_use.repeats();
        if (result.log.failed) {
            rec.failed = true;
            rec.failure_reasons.push_back("classifier: " + result.log.failure_reason);
        }
        rec.test_accuracy = evaluate_accuracy(result.classifier, data.test);
        rec.per_class_accuracy = evaluate_per_class(result.classifier, data.test);
        if (m_.save_checkpoints) {
            fs::create_directories(checkpoint_dir());
            save_classifier(result.classifier, ccfg,
                            checkpoint_dir() / classifier_checkpoint_name(m_.dataset.id, rec.key.family, seed, tau));
        }
        if (m_.metrics.knn) {
            MixtureSampler knn_stream(data.train, generator, mcfg);
            const auto n = std::min(data.train.size(), m_.metrics.knn_cap);
            rec.knn_accuracy = knn_accuracy(materialize_mixture(knn_stream, n), data.test, 1, m_.metrics.knn_cap);
        }
        if (tau == 0.0) {
            std::lock_guard lock(mu_);
            baselines_[seed] = std::make_shared<TrainedClassifier>(std::move(result.classifier));
        }
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.failure_reasons.push_back(e.what());
        rec.test_accuracy.reset();
    }
    rec.wall_time_s = seconds_since(t0);
    return rec;
}

void Sweep::run_baseline(std::uint64_t seed) {
    RunKey key{m_.dataset.id, kBaselineName, seed, 0.0, m_.baseline_hash()};
    if (have(key)) return;
    finish(train_and_score(key, splits(seed), nullptr, 0.0, seed));
}

std::shared_ptr<TrainedClassifier> Sweep::baseline_classifier(std::uint64_t seed) {
    {
        std::lock_guard lock(mu_);
        if (auto it = baselines_.find(seed); it != baselines_.end()) return it->second;
    }
    const auto path = checkpoint_dir() / classifier_checkpoint_name(m_.dataset.id, kBaselineName, seed, 0.0);
    if (fs::exists(path)) {
        try {
            auto clf = std::make_shared<TrainedClassifier>(load_classifier(path));
            std::lock_guard lock(mu_);
            baselines_[seed] = clf;
            return clf;
        } catch (const std::exception& e) {
            log::info("baseline checkpoint unreadable (", e.what(), "), retraining");
        }
    }
    // Deterministic retrain of a baseline whose record exists but whose
    // weights were not kept; the record itself is left untouched.
    (void)train_and_score(RunKey{m_.dataset.id, kBaselineName, seed, 0.0, m_.baseline_hash()},
                               splits(seed), nullptr, 0.0, seed);
    std::lock_guard lock(mu_);
    auto it = baselines_.find(seed);
    return it == baselines_.end() ? nullptr : it->second;
}

void Sweep::compute_reference_metrics() {
    if (!m_.metrics.enabled || m_.families.empty()) return;
    eval_classifier_ = baseline_classifier(m_.seeds.front());
    if (!eval_classifier_) {
        warnings_.push_back("evaluation classifier unavailable; IS/FID skipped");
        return;
    }
    const auto& d = splits(m_.seeds.front());
    try {
        is_test_ = dataset_is(*eval_classifier_, d.test);
        const auto n = std::min({m_.metrics.n_samples, d.test.size(), d.train.size()});
        fid_train_test_ = dataset_fid(*eval_classifier_, d.train, d.test, n);
        log::info("reference IS(test) ", *is_test_, ", FID(train, test) ", *fid_train_test_);
    } catch (const std::exception& e) {
        warnings_.push_back(std::string("reference metrics: ") + e.what());
    }
}

GeneratorPtr Sweep::obtain_generator(const FamilyEntry& entry, std::uint64_t seed, const LabeledDataset& train) {
    const auto path = checkpoint_dir() / generator_checkpoint_name(m_.dataset.id, entry.name, seed);
    const bool keep = m_.save_checkpoints && is_network_family(entry.family);
    if (keep && fs::exists(path)) {
        try {
            return load_generator(path);
        } catch (const std::exception& e) {
            log::info("generator checkpoint unreadable (", e.what(), "), retraining");
        }
    }
    auto g = build_generator(entry.family, train, m_.generator_config(entry, seed));
    if (keep) {
        fs::create_directories(checkpoint_dir());
        save_generator(*g, path);
    }
    return g;
}

void Sweep::run_family(const FamilyEntry& entry, std::uint64_t seed) {
    const auto hash = m_.family_hash(entry);
    std::vector<double> pending;
    for (double tau : m_.tau_grid) {
        if (tau > 0.0 && !have(RunKey{m_.dataset.id, entry.name, seed, tau, hash})) pending.push_back(tau);
    }
    if (pending.empty()) return;

    const auto& data = splits(seed);
    const auto t0 = std::chrono::steady_clock::now();
    GeneratorPtr generator;
    std::string build_error;
    try {
        generator = obtain_generator(entry, seed, data.train);
    } catch (const std::exception& e) {
        build_error = e.what();
    }
    const double generator_time = seconds_since(t0);

    std::optional<double> is, fid;
    if (generator && eval_classifier_) {
        try {
            is = adapted_is(*generator, *eval_classifier_, m_.metrics.n_samples, derive_seed(seed, "metrics/is"));
            const auto n = std::min(m_.metrics.n_samples, data.test.size());
            fid = adapted_fid(*generator, *eval_classifier_, data.test, n, derive_seed(seed, "metrics/fid"));
        } catch (const std::exception& e) {
            log::info(entry.name, " seed ", seed, ": metrics failed: ", e.what());
        }
    }

    for (double tau : pending) {
        RunKey key{m_.dataset.id, entry.name, seed, tau, hash};
        RunRecord rec;
        if (!generator) {
            rec.key = key;
            rec.psi = tau == 1.0;
            rec.failed = rec.generator_failed = true;
            rec.failure_reasons.push_back("generator: " + build_error);
        } else {
            rec = train_and_score(key, data, generator, tau, seed);
            rec.generator_loss_trace = generator->loss_trace();
            rec.generator_aux_trace = generator->aux_loss_trace();
            if (generator->status().failed) {
                rec.failed = rec.generator_failed = true;
                for (const auto& r : generator->status().reasons) rec.failure_reasons.push_back("generator: " + r);
            }
        }
        rec.adapted_is = is;
        rec.adapted_fid = fid;
        if (is && is_test_) rec.diff_is = diff_is(*is, *is_test_);
        rec.wall_time_s += generator_time / static_cast<double>(pending.size());
        finish(std::move(rec));
    }
}

SweepSummary Sweep::run() {
    m_.validate();
    source_ = load_source(m_.dataset);
    fs::create_directories(m_.output_dir);
    {
        std::ofstream out(m_.output_dir / "manifest.json");
        out << m_.to_json().dump(2) << '\n';
    }
    auto loaded = load_records(m_.output_dir);
    warnings_ = loaded.warnings;
    for (auto& r : loaded.records) existing_.emplace(r.key.id(), std::move(r));

    const int workers = m_.strict ? 1 : std::max(1, m_.parallel_workers);
    if (m_.strict || workers > 1) torch::set_num_threads(1);

    parallel_for(m_.seeds.size(), workers, [&](std::size_t i) { run_baseline(m_.seeds[i]); });
    compute_reference_metrics();

    // Attach the reference values to this invocation's baseline records.
    for (auto& rec : fresh_) {
        if (rec.key.family != kBaselineName) continue;
        rec.adapted_is = is_test_;
        rec.adapted_fid = fid_train_test_;
        if (is_test_) rec.diff_is = 0.0;
        persist_record(rec, m_.output_dir);
    }

    std::vector<std::pair<const FamilyEntry*, std::uint64_t>> groups;
    for (const auto& f : m_.families) {
        for (auto s : m_.seeds) groups.emplace_back(&f, s);
    }
    parallel_for(groups.size(), workers, [&](std::size_t i) {
        try {
            run_family(*groups[i].first, groups[i].second);
        } catch (const std::exception& e) {
            std::lock_guard lock(mu_);
            warnings_.push_back(groups[i].first->name + " seed " + std::to_string(groups[i].second) + ": " +
                                e.what());
        }
    });

    SweepSummary summary;
    summary.trained = fresh_.size();
    std::set<std::string> expected;
    for (auto s : m_.seeds) {
        expected.insert(RunKey{m_.dataset.id, kBaselineName, s, 0.0, m_.baseline_hash()}.id());
        for (const auto& f : m_.families) {
            for (double tau : m_.tau_grid) {
                if (tau > 0.0) expected.insert(RunKey{m_.dataset.id, f.name, s, tau, m_.family_hash(f)}.id());
            }
        }
    }
    for (auto& [id, rec] : existing_) {
        if (expected.count(id)) {
            summary.records.push_back(std::move(rec));
            ++summary.reused;
        }
    }
    for (auto& rec : fresh_) summary.records.push_back(std::move(rec));
    std::sort(summary.records.begin(), summary.records.end(),
              [](const RunRecord& a, const RunRecord& b) { return a.key.id() < b.key.id(); });
    summary.warnings = std::move(warnings_);
    return summary;
}

}  // namespace

// --- manifest -----------------------------------------------------------------

nlohmann::json DatasetConfig::to_json() const {
    nlohmann::json j = {{"id", id},
                        {"num_classes", num_classes},
                        {"valid_count", valid_count},
                        {"train_limit", train_limit ? nlohmann::json(*train_limit) : nlohmann::json(nullptr)},
                        {"test_limit", test_limit ? nlohmann::json(*test_limit) : nlohmann::json(nullptr)}};
    if (id == "synthetic") {
        j["synthetic"] = {{"num_classes", synthetic.num_classes}, {"dims", synthetic.dims},
                          {"per_class", synthetic.per_class},     {"noise_std", synthetic.noise_std},
                          {"mean_low", synthetic.mean_low},       {"mean_high", synthetic.mean_high},
                          {"test_per_class", synthetic_test_per_class}, {"seed", synthetic_seed}};
    } else {
        j["train_images"] = train_images.string();
        j["train_labels"] = train_labels.string();
        j["test_images"] = test_images.string();
        j["test_labels"] = test_labels.string();
    }
    return j;
}

nlohmann::json MetricsConfig::to_json() const {
    return {{"enabled", enabled}, {"n_samples", n_samples}, {"knn", knn}, {"knn_cap", knn_cap}};
}

void ExperimentManifest::validate() const {
    if (dataset.id != "mnist" && dataset.id != "fashion" && dataset.id != "synthetic") {
        throw ArgumentError("unknown dataset id '" + dataset.id + "'");
    }
    if (dataset.valid_count < 1) throw ArgumentError("valid_count must be >= 1");
    if (seeds.empty()) throw ArgumentError("at least one seed is required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ArgumentError("seeds must be unique");
    }
    if (tau_grid.empty()) throw ArgumentError("tau_grid is empty");
    for (std::size_t i = 0; i < tau_grid.size(); ++i) {
        if (!(tau_grid[i] >= 0.0 && tau_grid[i] <= 1.0)) throw ArgumentError("tau values must lie in [0,1]");
        if (i > 0 && !(tau_grid[i] > tau_grid[i - 1])) throw ArgumentError("tau_grid must be sorted and unique");
    }
    std::set<std::string> names;
    for (const auto& f : families) {
        if (f.name.empty() || f.name == kBaselineName) throw ArgumentError("invalid family name '" + f.name + "'");
        if (!names.insert(f.name).second) throw ArgumentError("duplicate family name '" + f.name + "'");
        generator_config(f, 0).validate();
    }
    classifier.validate();
    if (parallel_workers < 1) throw ArgumentError("parallel_workers must be >= 1");
    if (metrics.n_samples < 1 || metrics.knn_cap < 1) throw ArgumentError("metric sample counts must be >= 1");
}

ExperimentManifest ExperimentManifest::from_json(const nlohmann::json& j, const fs::path& base_dir) {
    ExperimentManifest m;
    if (j.contains("dataset")) m.dataset = dataset_from_json(j.at("dataset"), base_dir);
    if (j.contains("families")) {
        for (const auto& f : j.at("families")) {
            FamilyEntry e;
            if (f.is_string()) {
                e.family = parse_family(f.get<std::string>());
                e.name = to_string(e.family);
            } else {
                e.family = parse_family(f.at("family").get<std::string>());
                e.name = f.value("name", to_string(e.family));
                e.overrides = f.value("overrides", nlohmann::json::object());
            }
            m.families.push_back(std::move(e));
        }
    }
    if (j.contains("seeds")) m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("tau_grid")) m.tau_grid = j.at("tau_grid").get<std::vector<double>>();
    m.generator = j.value("generator", nlohmann::json::object());
    auto clf = j.value("classifier", nlohmann::json::object());
    clf["dataset_id"] = m.dataset.id;
    m.classifier = ClassifierConfig::from_json(clf);
    if (j.contains("metrics")) {
        const auto& mj = j.at("metrics");
        m.metrics.enabled = mj.value("enabled", m.metrics.enabled);
        m.metrics.n_samples = mj.value("n_samples", m.metrics.n_samples);
        m.metrics.knn = mj.value("knn", m.metrics.knn);
        m.metrics.knn_cap = mj.value("knn_cap", m.metrics.knn_cap);
    }
    m.output_dir = resolve(j.value("output_dir", m.output_dir.string()), base_dir);
    m.parallel_workers = j.value("parallel_workers", m.parallel_workers);
    m.strict = j.value("strict", m.strict);
    m.save_checkpoints = j.value("save_checkpoints", m.save_checkpoints);
    return m;
}

nlohmann::json ExperimentManifest::to_json() const {
    auto fam = nlohmann::json::array();
    for (const auto& f : families) {
        fam.push_back({{"name", f.name}, {"family", to_string(f.family)}, {"overrides", f.overrides}});
    }
    return {{"dataset", dataset.to_json()},
            {"families", fam},
            {"seeds", seeds},
            {"tau_grid", tau_grid},
            {"generator", generator},
            {"classifier", classifier.to_json()},
            {"metrics", metrics.to_json()},
            {"output_dir", output_dir.string()},
            {"parallel_workers", parallel_workers},
            {"strict", strict},
            {"save_checkpoints", save_checkpoints}};
}

GeneratorConfig ExperimentManifest::generator_config(const FamilyEntry& entry, std::uint64_t seed) const {
    auto j = GeneratorConfig::defaults(entry.family, seed).to_json();
    j.merge_patch(generator);
    j.merge_patch(entry.overrides);
    j["family"] = to_string(entry.family);
    j["seed"] = seed;
    return GeneratorConfig::from_json(j);
}

ClassifierConfig ExperimentManifest::classifier_config(std::uint64_t seed) const {
    auto c = classifier;
    c.dataset_id = dataset.id;
    c.seed = derive_seed(seed, "classifier");
    return c;
}

std::string ExperimentManifest::baseline_hash() const {
    auto clf = classifier.to_json();
    clf.erase("seed");
    return hash_json({{"dataset", dataset.to_json()}, {"classifier", clf}});
}

std::string ExperimentManifest::family_hash(const FamilyEntry& entry) const {
    auto clf = classifier.to_json();
    clf.erase("seed");
    auto gen = generator_config(entry, 0).to_json();
    gen.erase("seed");
    return hash_json({{"dataset", dataset.to_json()}, {"classifier", clf}, {"generator", gen}});
}

std::size_t ExperimentManifest::expected_records() const {
    const auto positive = static_cast<std::size_t>(std::count_if(tau_grid.begin(), tau_grid.end(),
                                                                 [](double t) { return t > 0.0; }));
    return seeds.size() * (1 + families.size() * positive);
}

ExperimentManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    auto m = ExperimentManifest::from_json(j, path.parent_path());
    m.validate();
    return m;
}

DatasetSplits load_splits(const DatasetConfig& cfg, std::uint64_t seed) {
    return split_source(load_source(cfg), cfg, seed);
}

SweepSummary run_experiment(const ExperimentManifest& manifest, const SweepHooks& hooks) {
    Sweep sweep(manifest, hooks);
    return sweep.run();
}

}  // namespace fitcap
