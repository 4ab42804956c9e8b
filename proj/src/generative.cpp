#include "fitcap/generative.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fitcap/errors.hpp"
#include "fitcap/rng.hpp"
#include "fitcap/seeding.hpp"

namespace fitcap {

namespace {

constexpr std::int64_t kGenerateChunk = 1000;
constexpr const char* kFormatTag = "fitcap-generator";
constexpr int kFormatVersion = 1;

struct FamilyName {
    Family family;
    const char* name;
};

constexpr FamilyName kFamilyNames[] = {
    {Family::VAE, "VAE"},       {Family::CVAE, "CVAE"},   {Family::GAN, "GAN"},
    {Family::CGAN, "CGAN"},     {Family::WGAN, "WGAN"},   {Family::BEGAN, "BEGAN"},
    {Family::Replay, "REPLAY"}, {Family::Noise, "NOISE"}, {Family::LabelScramble, "SCRAMBLE"},
};

torch::Tensor check_labels(const torch::Tensor& labels, int num_classes) {
    auto l = labels.to(torch::kInt64).contiguous().view({-1});
    if (l.numel() > 0) {
        const auto lo = l.min().item<std::int64_t>();
        const auto hi = l.max().item<std::int64_t>();
        if (lo < 0 || hi >= num_classes) {
            throw ArgumentError("requested label outside {0.." + std::to_string(num_classes - 1) + "}");
        }
    }
    return l;
}

nlohmann::json status_json(const TrainingStatus& s) { return {{"failed", s.failed}, {"reasons", s.reasons}}; }

TrainingStatus status_from_json(const nlohmann::json& j) {
    TrainingStatus s;
    s.failed = j.value("failed", false);
    s.reasons = j.value("reasons", std::vector<std::string>{});
    return s;
}

// NaN is not representable in JSON; non-finite trace entries become null.
nlohmann::json trace_json(const std::vector<double>& trace) {
    auto arr = nlohmann::json::array();
    for (double v : trace) {
        if (std::isfinite(v)) {
            arr.push_back(v);
        } else {
            arr.push_back(nullptr);
        }
    }
    return arr;
}

std::vector<double> trace_from_json(const nlohmann::json& j) {
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.is_null() ? std::nan("") : v.get<double>());
    return out;
}

nlohmann::json base_meta(const TrainedGenerator& g, const std::string& kind) {
    return {{"format", kFormatTag},
            {"version", kFormatVersion},
            {"kind", kind},
            {"family", to_string(g.family())},
            {"num_classes", g.num_classes()},
            {"loss_trace", trace_json(g.loss_trace())},
            {"aux_loss_trace", trace_json(g.aux_loss_trace())},
            {"status", status_json(g.status())}};
}

void save_archive(torch::serialize::OutputArchive& ar, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    ar.save_to(tmp.string());
    std::filesystem::rename(tmp, path);
}

nlohmann::json read_meta(torch::serialize::InputArchive& ar, const std::filesystem::path& path) {
    c10::IValue meta;
    if (!ar.try_read("meta", meta) || !meta.isString()) {
        throw FormatError(path.string() + ": not a generator checkpoint (no meta entry)");
    }
    auto j = nlohmann::json::parse(meta.toStringRef());
    if (j.value("format", "") != kFormatTag) throw FormatError(path.string() + ": wrong checkpoint format tag");
    return j;
}

void restore_common(TrainedGenerator& g, const nlohmann::json& meta) {
    g.set_traces(trace_from_json(meta.at("loss_trace")), trace_from_json(meta.at("aux_loss_trace")));
    g.mutable_status() = status_from_json(meta.at("status"));
}

std::shared_ptr<NetworkGenerator> load_network(const std::filesystem::path& path) {
    torch::serialize::InputArchive ar;
    ar.load_from(path.string());
    const auto meta = read_meta(ar, path);
    if (meta.at("kind") != "network") throw FormatError(path.string() + ": expected a network checkpoint");
    auto g = std::make_shared<NetworkGenerator>(GeneratorConfig::from_json(meta.at("config")),
                                                meta.at("num_classes").get<int>());
    torch::serialize::InputArchive weights;
    ar.read("generator", weights);
    g->network()->load(weights);
    g->network()->eval();
    restore_common(*g, meta);
    return g;
}

}  // namespace

std::string to_string(Family f) {
    for (const auto& fn : kFamilyNames) {
        if (fn.family == f) return fn.name;
    }
    return "UNKNOWN";
}

Family parse_family(const std::string& name) {
    std::string upper = name;
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
    for (const auto& fn : kFamilyNames) {
        if (upper == fn.name) return fn.family;
    }
    throw ArgumentError("unknown generator family '" + name + "'");
}

bool is_conditional(Family f) { return f == Family::CVAE || f == Family::CGAN; }

bool is_network_family(Family f) {
    return f == Family::VAE || f == Family::CVAE || f == Family::GAN || f == Family::CGAN || f == Family::WGAN ||
           f == Family::BEGAN;
}

// --- config -------------------------------------------------------------------

GeneratorConfig GeneratorConfig::defaults(Family family, std::uint64_t seed) {
    GeneratorConfig c;
    c.family = family;
    c.seed = seed;
    c.conditional = is_conditional(family);
    if (family == Family::VAE || family == Family::CVAE) {
        c.learning_rate = 1e-3;
        c.beta1 = 0.9;
    } else {
        c.learning_rate = 2e-4;
        c.beta1 = 0.5;
    }
    if (family == Family::WGAN) {
        c.family_params = {{"clip", 0.01}, {"critic_steps", 5}};
    } else if (family == Family::BEGAN) {
        c.family_params = {{"gamma", 0.75}, {"lambda_k", 0.001}};
    }
    return c;
}

void GeneratorConfig::validate() const {
    if (latent_dim < 1) throw ArgumentError("latent_dim must be >= 1");
    if (epochs < 1) throw ArgumentError("epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning_rate must be > 0");
    if (batch_size < 2) throw ArgumentError("batch_size must be >= 2 (batch normalisation)");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ArgumentError("Adam betas in [0,1)");
    if (conditional != is_conditional(family)) {
        throw ArgumentError("conditional flag must be set exactly for CVAE and CGAN");
    }
    if (!family_params.is_object()) throw ArgumentError("family_params must be a key-value map");
}

double GeneratorConfig::param(const std::string& key, double fallback) const {
    if (family_params.contains(key)) return family_params.at(key).get<double>();
    return fallback;
}

nlohmann::json GeneratorConfig::to_json() const {
    return {{"family", to_string(family)},
            {"latent_dim", latent_dim},
            {"epochs", epochs},
            {"seed", seed},
            {"learning_rate", learning_rate},
            {"beta1", beta1},
            {"beta2", beta2},
            {"batch_size", batch_size},
            {"conditional", conditional},
            {"family_params", family_params}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
    auto c = defaults(parse_family(j.at("family").get<std::string>()), j.value("seed", std::uint64_t{0}));
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.conditional = j.value("conditional", c.conditional);
    if (j.contains("family_params")) c.family_params = j.at("family_params");
    return c;
}

void TrainingStatus::merge(const TrainingStatus& other, const std::string& prefix) {
    if (!other.failed) return;
    failed = true;
    for (const auto& r : other.reasons) reasons.push_back(prefix + r);
}

// --- generators ---------------------------------------------------------------

NetworkGenerator::NetworkGenerator(GeneratorConfig config, int num_classes)
    : config_(std::move(config)),
      num_classes_(num_classes),
      net_(config_.latent_dim + (config_.conditional ? num_classes : 0)) {
    auto gen = make_torch_generator(derive_seed(config_.seed, "generator/init"));
    nets::init_dcgan(*net_, gen);
    net_->eval();
}

torch::Tensor NetworkGenerator::generate(const torch::Tensor& labels, std::uint64_t seed) const {
    torch::NoGradGuard guard;
    const auto n = labels.size(0);
    auto out = torch::empty({n, 1, nets::kImageSide, nets::kImageSide});
    if (n == 0) return out;
    auto gen = make_torch_generator(seed);
    for (std::int64_t start = 0; start < n; start += kGenerateChunk) {
        const auto len = std::min(kGenerateChunk, n - start);
        auto z = torch::randn({len, config_.latent_dim}, gen);
        if (config_.conditional) z = torch::cat({z, nets::one_hot(labels.narrow(0, start, len), num_classes_)}, 1);
        out.narrow(0, start, len).copy_(net_->forward(z));
    }
    return out;
}

ClasswiseEnsemble::ClasswiseEnsemble(std::vector<std::shared_ptr<NetworkGenerator>> members)
    : members_(std::move(members)) {
    if (members_.size() < 2) throw ArgumentError("a class-wise ensemble needs one member per class (K >= 2)");
    for (std::size_t k = 0; k < members_.size(); ++k) {
        mutable_status().merge(members_[k]->status(), "class " + std::to_string(k) + ": ");
    }
    // Ensemble trace: per-epoch mean over members.
    auto mean_trace = [this](auto get) {
        std::size_t len = get(*members_.front()).size();
        for (const auto& m : members_) len = std::min(len, get(*m).size());
        std::vector<double> out(len, 0.0);
        for (const auto& m : members_) {
            for (std::size_t e = 0; e < len; ++e) out[e] += get(*m)[e] / static_cast<double>(members_.size());
        }
        return out;
    };
    set_traces(mean_trace([](const TrainedGenerator& g) -> const std::vector<double>& { return g.loss_trace(); }),
               mean_trace([](const TrainedGenerator& g) -> const std::vector<double>& { return g.aux_loss_trace(); }));
}

Family ClasswiseEnsemble::family() const { return members_.front()->family(); }

torch::Tensor ClasswiseEnsemble::generate(const torch::Tensor& labels, std::uint64_t seed) const {
    torch::NoGradGuard guard;
    const auto n = labels.size(0);
    auto out = torch::empty({n, 1, nets::kImageSide, nets::kImageSide});
    for (int k = 0; k < num_classes(); ++k) {
        auto idx = torch::nonzero(labels == k).flatten();
        const auto count = idx.numel();
        if (count == 0) continue;
        if (hook_) hook_(k, count);
        auto part = members_[static_cast<std::size_t>(k)]->generate(labels.index_select(0, idx),
                                                                    derive_seed(seed, "member", k));
        out.index_copy_(0, idx, part);
    }
    return out;
}

ReplayGenerator::ReplayGenerator(LabeledDataset data, Mode mode) : data_(std::move(data)), mode_(mode) {
    validate(data_);
    for (int k = 0; k < data_.num_classes; ++k) by_class_.push_back(torch::nonzero(data_.labels == k).flatten());
}

torch::Tensor ReplayGenerator::generate(const torch::Tensor& labels, std::uint64_t seed) const {
    const auto n = labels.size(0);
    if (mode_ == Mode::sequential) {
        auto idx = torch::arange(n, torch::kInt64).remainder(data_.size());
        return data_.samples.index_select(0, idx);
    }
    auto gen = make_torch_generator(seed);
    auto idx = torch::empty({n}, torch::kInt64);
    for (int k = 0; k < data_.num_classes; ++k) {
        auto pos = torch::nonzero(labels == k).flatten();
        if (pos.numel() == 0) continue;
        const auto& pool = by_class_[static_cast<std::size_t>(k)];
        if (pool.numel() == 0) throw ArgumentError("replay data has no samples of class " + std::to_string(k));
        auto pick = torch::randint(pool.numel(), {pos.numel()}, gen, torch::kInt64);
        idx.index_copy_(0, pos, pool.index_select(0, pick));
    }
    return data_.samples.index_select(0, idx);
}

torch::Tensor NoiseGenerator::generate(const torch::Tensor& labels, std::uint64_t seed) const {
    auto gen = make_torch_generator(seed);
    return torch::rand({labels.size(0), 1, nets::kImageSide, nets::kImageSide}, gen);
}

torch::Tensor LabelScrambleGenerator::generate(const torch::Tensor& labels, std::uint64_t seed) const {
    auto gen = make_torch_generator(seed);
    auto idx = torch::randint(data_.size(), {labels.size(0)}, gen, torch::kInt64);
    return data_.samples.index_select(0, idx);
}

// --- sampling -----------------------------------------------------------------

LabeledDataset sample_labeled(const TrainedGenerator& generator, const torch::Tensor& labels, std::uint64_t seed) {
    auto l = check_labels(labels, generator.num_classes());
    auto raw = generator.generate(l, seed);
    auto samples = torch::nan_to_num(raw, 0.0, 1.0, 0.0).clamp(0.0, 1.0).contiguous();
    return LabeledDataset{samples, l.clone(), generator.num_classes()};
}

LabeledDataset sample_labeled(const TrainedGenerator& generator, const std::vector<std::int64_t>& labels,
                              std::uint64_t seed) {
    auto t = labels.empty() ? torch::empty({0}, torch::kInt64) : torch::tensor(labels, torch::kInt64);
    return sample_labeled(generator, t, seed);
}

LabeledDataset sample_uniform(const TrainedGenerator& generator, std::int64_t n, std::uint64_t seed) {
    if (n < 0) throw ArgumentError("sample count must be non-negative");
    Rng rng(derive_seed(seed, "labels"));
    auto labels = torch::empty({n}, torch::kInt64);
    auto* l = labels.data_ptr<std::int64_t>();
    const auto k = static_cast<std::uint64_t>(generator.num_classes());
    for (std::int64_t i = 0; i < n; ++i) l[i] = static_cast<std::int64_t>(rng.below(k));

    std::vector<torch::Tensor> parts;
    for (std::int64_t start = 0, chunk = 0; start < n; start += kGenerateChunk, ++chunk) {
        const auto len = std::min(kGenerateChunk, n - start);
        parts.push_back(
            sample_labeled(generator, labels.narrow(0, start, len), derive_seed(seed, "chunk", chunk)).samples);
    }
    auto samples = parts.empty() ? torch::empty({0, 1, nets::kImageSide, nets::kImageSide}) : torch::cat(parts, 0);
    return LabeledDataset{samples, labels, generator.num_classes()};
}

double output_variance(const TrainedGenerator& generator, std::uint64_t seed, std::int64_t probe) {
    auto d = sample_uniform(generator, probe, seed);
    return d.samples.to(torch::kFloat64).var(0, /*unbiased=*/false).mean().item<double>();
}

// --- checkpoints --------------------------------------------------------------

std::string generator_checkpoint_name(const std::string& dataset, const std::string& model, std::uint64_t seed,
                                      std::optional<int> class_index) {
    std::string name = dataset + "_" + model + "_" + std::to_string(seed);
    if (class_index) name += "_class" + std::to_string(*class_index);
    return name + ".ckpt";
}

void save_generator(const TrainedGenerator& generator, const std::filesystem::path& path) {
    if (const auto* net = dynamic_cast<const NetworkGenerator*>(&generator)) {
        auto meta = base_meta(generator, "network");
        meta["config"] = net->config().to_json();
        torch::serialize::OutputArchive ar;
        ar.write("meta", c10::IValue(meta.dump()));
        torch::serialize::OutputArchive weights;
        net->network()->save(weights);
        ar.write("generator", weights);
        save_archive(ar, path);
        return;
    }
    if (const auto* ens = dynamic_cast<const ClasswiseEnsemble*>(&generator)) {
        auto meta = base_meta(generator, "ensemble");
        auto names = nlohmann::json::array();
        const auto stem = path.stem().string();
        for (std::size_t k = 0; k < ens->members().size(); ++k) {
            const auto member = stem + "_class" + std::to_string(k) + ".ckpt";
            save_generator(*ens->members()[k], path.parent_path() / member);
            names.push_back(member);
        }
        meta["members"] = names;
        torch::serialize::OutputArchive ar;
        ar.write("meta", c10::IValue(meta.dump()));
        save_archive(ar, path);
        return;
    }
    if (generator.family() == Family::Noise) {
        torch::serialize::OutputArchive ar;
        ar.write("meta", c10::IValue(base_meta(generator, "noise").dump()));
        save_archive(ar, path);
        return;
    }
    throw ArgumentError("data-backed reference generators are rebuilt from the dataset, not checkpointed");
}

GeneratorPtr load_generator(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("missing checkpoint " + path.string());
    torch::serialize::InputArchive ar;
    ar.load_from(path.string());
    const auto meta = read_meta(ar, path);
    const auto kind = meta.at("kind").get<std::string>();
    if (kind == "network") return load_network(path);
    if (kind == "ensemble") {
        std::vector<std::shared_ptr<NetworkGenerator>> members;
        for (const auto& name : meta.at("members")) {
            members.push_back(load_network(path.parent_path() / name.get<std::string>()));
        }
        if (static_cast<int>(members.size()) != meta.at("num_classes").get<int>()) {
            throw ConsistencyError(path.string() + ": member count differs from num_classes");
        }
        auto ens = std::make_shared<ClasswiseEnsemble>(std::move(members));
        restore_common(*ens, meta);
        return ens;
    }
    if (kind == "noise") return std::make_shared<NoiseGenerator>(meta.at("num_classes").get<int>());
    throw FormatError(path.string() + ": unknown generator kind '" + kind + "'");
}

}  // namespace fitcap
