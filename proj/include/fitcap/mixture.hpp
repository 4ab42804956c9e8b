#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <torch/torch.h>

#include "fitcap/dataset.hpp"
#include "fitcap/generative.hpp"
#include "fitcap/rng.hpp"

namespace fitcap {

struct MixtureConfig {
    double tau = 0.0;  // probability that a batch is generated
    int batch_size = 64;
    std::uint64_t rng_seed = 0;
    // Generated batches are produced this many at a time (one generator
    // call) and then handed out in order; nothing is ever served twice.
    int generation_block = 16;

    void validate() const;
};

struct Batch {
    torch::Tensor samples;
    torch::Tensor labels;
    bool generated = false;
};

// Cyclic view over the real training set: each cycle is a fresh shuffled
// permutation cut into batch_size chunks (the last one may be short), so
// every index appears exactly once per cycle.
class RealStream {
public:
    RealStream(LabeledDataset data, int batch_size, std::uint64_t seed);

    Batch next();
    std::int64_t cycle() const { return cycle_; }
    std::int64_t batches_per_cycle() const;
    const LabeledDataset& data() const { return data_; }
    // Indices of the last batch returned by next().
    const std::vector<std::int64_t>& last_indices() const { return last_; }

private:
    void reshuffle();

    LabeledDataset data_;
    int batch_size_;
    Rng rng_;
    std::vector<std::int64_t> order_;
    std::vector<std::int64_t> last_;
    std::size_t cursor_ = 0;
    std::int64_t cycle_ = -1;
};

// ---------------------------------------------------------------------------
// MixtureSampler: one Bernoulli(tau) draw per batch decides between a fresh
// generated batch (uniform labels, never reused) and the next real batch.
// Real data is only advanced on real draws and the generator is only called
// on generated draws.
// ---------------------------------------------------------------------------
class MixtureSampler {
public:
    using Observer = std::function<void(const Batch&)>;

    MixtureSampler(LabeledDataset train, GeneratorPtr generator, MixtureConfig config);

    Batch next_batch();

    std::int64_t generated_batches() const { return generated_; }
    std::int64_t real_batches() const { return real_; }
    const RealStream& real_stream() const { return real_stream_; }
    const MixtureConfig& config() const { return config_; }
    int num_classes() const { return real_stream_.data().num_classes; }
    std::int64_t train_size() const { return real_stream_.data().size(); }

    void set_observer(Observer obs) { observer_ = std::move(obs); }

private:
    RealStream real_stream_;
    GeneratorPtr generator_;
    MixtureConfig config_;
    Rng rng_;        // batch source decisions only
    Rng label_rng_;  // labels and generator seeds
    std::int64_t generated_ = 0;
    std::int64_t real_ = 0;
    LabeledDataset block_;
    std::int64_t block_pos_ = 0;
    Observer observer_;
};

// Materialises `n` samples through the mixture rule (used for the 1-NN
// control, which needs a fixed training set).
LabeledDataset materialize_mixture(MixtureSampler& sampler, std::int64_t n);

}  // namespace fitcap
