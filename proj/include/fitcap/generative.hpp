#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "fitcap/dataset.hpp"
#include "fitcap/networks.hpp"

namespace fitcap {

// The six trained families, plus three reference samplers used as sanity
// anchors: Replay re-emits stored real pairs, Noise emits uniform pixels,
// LabelScramble emits real images under labels unrelated to their content.
enum class Family { VAE, CVAE, GAN, CGAN, WGAN, BEGAN, Replay, Noise, LabelScramble };

std::string to_string(Family f);
Family parse_family(const std::string& name);
bool is_conditional(Family f);
bool is_network_family(Family f);

struct GeneratorConfig {
    Family family = Family::VAE;
    int latent_dim = 20;
    int epochs = 25;
    std::uint64_t seed = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    int batch_size = 64;
    bool conditional = false;
    // WGAN: clip, critic_steps.  BEGAN: gamma, lambda_k.
    nlohmann::json family_params = nlohmann::json::object();

    // Family defaults: Adam 2e-4 / beta1 0.5 for adversarial families,
    // 1e-3 with default betas for VAE/CVAE; batch 64; WGAN clip 0.01 with 5
    // critic steps; BEGAN gamma 0.75, lambda_k 0.001.
    static GeneratorConfig defaults(Family family, std::uint64_t seed = 0);

    void validate() const;
    double param(const std::string& key, double fallback) const;

    nlohmann::json to_json() const;
    static GeneratorConfig from_json(const nlohmann::json& j);
};

struct TrainingStatus {
    bool failed = false;
    std::vector<std::string> reasons;

    void flag(std::string reason) {
        failed = true;
        reasons.push_back(std::move(reason));
    }
    void merge(const TrainingStatus& other, const std::string& prefix);
};

// ---------------------------------------------------------------------------
// TrainedGenerator: maps requested labels to synthetic images.
//
// `generate` returns raw network output (N, 1, 28, 28); callers go through
// sample_labeled, which validates labels and sanitises the range. A trained
// generator is immutable; concurrent sampling is safe with distinct seeds.
// ---------------------------------------------------------------------------
class TrainedGenerator {
public:
    virtual ~TrainedGenerator() = default;

    virtual Family family() const = 0;
    virtual int num_classes() const = 0;
    virtual torch::Tensor generate(const torch::Tensor& labels, std::uint64_t seed) const = 0;

    std::vector<std::int64_t> sample_shape() const { return {1, nets::kImageSide, nets::kImageSide}; }

    const std::vector<double>& loss_trace() const { return loss_trace_; }
    const std::vector<double>& aux_loss_trace() const { return aux_loss_trace_; }
    const TrainingStatus& status() const { return status_; }

    void set_traces(std::vector<double> loss, std::vector<double> aux) {
        loss_trace_ = std::move(loss);
        aux_loss_trace_ = std::move(aux);
    }
    TrainingStatus& mutable_status() { return status_; }

private:
    std::vector<double> loss_trace_;      // primary objective, one value per epoch
    std::vector<double> aux_loss_trace_;  // discriminator/critic objective, if any
    TrainingStatus status_;
};

using GeneratorPtr = std::shared_ptr<const TrainedGenerator>;

// A single network. Conditional networks append the one-hot label to the
// latent vector; unconditional ones ignore the requested labels.
class NetworkGenerator final : public TrainedGenerator {
public:
    NetworkGenerator(GeneratorConfig config, int num_classes);

    Family family() const override { return config_.family; }
    int num_classes() const override { return num_classes_; }
    torch::Tensor generate(const torch::Tensor& labels, std::uint64_t seed) const override;

    const GeneratorConfig& config() const { return config_; }
    nets::ImageGenerator& network() { return net_; }
    const nets::ImageGenerator& network() const { return net_; }

private:
    GeneratorConfig config_;
    int num_classes_;
    mutable nets::ImageGenerator net_;
};

// K unconditional generators, one per class; label k always routes to
// member k.
class ClasswiseEnsemble final : public TrainedGenerator {
public:
    using RoutingHook = std::function<void(int label, std::int64_t count)>;

    explicit ClasswiseEnsemble(std::vector<std::shared_ptr<NetworkGenerator>> members);

    Family family() const override;
    int num_classes() const override { return static_cast<int>(members_.size()); }
    torch::Tensor generate(const torch::Tensor& labels, std::uint64_t seed) const override;

    const std::vector<std::shared_ptr<NetworkGenerator>>& members() const { return members_; }
    // Instrumentation: called once per member invocation during generate.
    void set_routing_hook(RoutingHook hook) { hook_ = std::move(hook); }

private:
    std::vector<std::shared_ptr<NetworkGenerator>> members_;
    RoutingHook hook_;
};

class ReplayGenerator final : public TrainedGenerator {
public:
    // random_of_class: each request draws a stored sample of that class.
    // sequential: request i returns stored sample i (mod N), label ignored.
    enum class Mode { random_of_class, sequential };

    ReplayGenerator(LabeledDataset data, Mode mode = Mode::random_of_class);

    Family family() const override { return Family::Replay; }
    int num_classes() const override { return data_.num_classes; }
    torch::Tensor generate(const torch::Tensor& labels, std::uint64_t seed) const override;

private:
    LabeledDataset data_;
    Mode mode_;
    std::vector<torch::Tensor> by_class_;
};

class NoiseGenerator final : public TrainedGenerator {
public:
    explicit NoiseGenerator(int num_classes) : num_classes_(num_classes) {}
    Family family() const override { return Family::Noise; }
    int num_classes() const override { return num_classes_; }
    torch::Tensor generate(const torch::Tensor& labels, std::uint64_t seed) const override;

private:
    int num_classes_;
};

class LabelScrambleGenerator final : public TrainedGenerator {
public:
    explicit LabelScrambleGenerator(LabeledDataset data) : data_(std::move(data)) {}
    Family family() const override { return Family::LabelScramble; }
    int num_classes() const override { return data_.num_classes; }
    torch::Tensor generate(const torch::Tensor& labels, std::uint64_t seed) const override;

private:
    LabeledDataset data_;
};

// Trains one network on all of `train` for exactly config.epochs epochs (or
// until a non-finite loss, which is flagged in status() rather than thrown).
std::shared_ptr<NetworkGenerator> train_generator(Family family, const LabeledDataset& train,
                                                  GeneratorConfig config);

// One unconditional network per class subset; member k gets seed
// derive_seed(config.seed, "class", k).
std::shared_ptr<ClasswiseEnsemble> train_classwise_ensemble(Family family, const LabeledDataset& train,
                                                            GeneratorConfig config);

// Conditional families train one network, unconditional ones an ensemble,
// reference families wrap `train`.
GeneratorPtr build_generator(Family family, const LabeledDataset& train, const GeneratorConfig& config);

// Requested labels paired with fresh samples; NaN/Inf output from a failed
// generator is mapped into [0,1] so downstream invariants hold.
LabeledDataset sample_labeled(const TrainedGenerator& generator, const torch::Tensor& labels,
                              std::uint64_t seed);
LabeledDataset sample_labeled(const TrainedGenerator& generator, const std::vector<std::int64_t>& labels,
                              std::uint64_t seed);

// Uniform labels over {0..K-1}, then sample_labeled, in chunks.
LabeledDataset sample_uniform(const TrainedGenerator& generator, std::int64_t n, std::uint64_t seed);

// Mean per-pixel variance over a probe batch; < 1e-6 flags a collapse.
double output_variance(const TrainedGenerator& generator, std::uint64_t seed, std::int64_t probe = 64);
inline constexpr double kCollapseVariance = 1e-6;

// Checkpoints: a libtorch archive holding a JSON "meta" string (format tag,
// family, config echo, K, traces, status) and the generator weights.
// Ensembles write one file per member ({stem}_class{k}.ckpt) plus an index
// file at `path` listing them.
void save_generator(const TrainedGenerator& generator, const std::filesystem::path& path);
GeneratorPtr load_generator(const std::filesystem::path& path);

std::string generator_checkpoint_name(const std::string& dataset, const std::string& model, std::uint64_t seed,
                                      std::optional<int> class_index = std::nullopt);

}  // namespace fitcap
