#include "fitcap/mixture.hpp"

#include <numeric>

#include "fitcap/errors.hpp"
#include "fitcap/seeding.hpp"

namespace fitcap {

void MixtureConfig::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ArgumentError("tau must lie in [0,1], got " + std::to_string(tau));
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
    if (generation_block < 1) throw ArgumentError("generation_block must be >= 1");
}

RealStream::RealStream(LabeledDataset data, int batch_size, std::uint64_t seed)
    : data_(std::move(data)), batch_size_(batch_size), rng_(seed) {
    validate(data_);
    if (batch_size_ < 1) throw ArgumentError("batch_size must be >= 1");
    order_.resize(static_cast<std::size_t>(data_.size()));
}

std::int64_t RealStream::batches_per_cycle() const { return (data_.size() + batch_size_ - 1) / batch_size_; }

void RealStream::reshuffle() {
    std::iota(order_.begin(), order_.end(), std::int64_t{0});
    rng_.shuffle(order_);
    cursor_ = 0;
    ++cycle_;
}

Batch RealStream::next() {
    if (cycle_ < 0 || cursor_ >= order_.size()) reshuffle();
    const auto len = std::min(static_cast<std::size_t>(batch_size_), order_.size() - cursor_);
    last_.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + len));
    cursor_ += len;
    auto idx = torch::tensor(last_, torch::kInt64);
    return Batch{data_.samples.index_select(0, idx), data_.labels.index_select(0, idx), false};
}

MixtureSampler::MixtureSampler(LabeledDataset train, GeneratorPtr generator, MixtureConfig config)
    : real_stream_(std::move(train), config.batch_size, derive_seed(config.rng_seed, "sampler/real")),
      generator_(std::move(generator)),
      config_(config),
      rng_(derive_seed(config.rng_seed, "sampler/mix")),
      label_rng_(derive_seed(config.rng_seed, "sampler/labels")) {
    config_.validate();
    if (config_.tau > 0.0 && !generator_) throw ArgumentError("tau > 0 requires a generator");
    if (generator_ && generator_->num_classes() != real_stream_.data().num_classes) {
        throw ArgumentError("generator and training data disagree on the number of classes");
    }
}

Batch MixtureSampler::next_batch() {
    const bool use_generated = rng_.bernoulli(config_.tau);
    Batch batch;
    if (use_generated) {
        const std::int64_t bs = config_.batch_size;
        if (block_pos_ + bs > block_.size()) {
            // Per-class ensembles pay per member call, so batches are
            // generated in blocks; each sample still goes out exactly once.
            const auto k = static_cast<std::uint64_t>(num_classes());
            std::vector<std::int64_t> labels(static_cast<std::size_t>(bs * config_.generation_block));
            for (auto& l : labels) l = static_cast<std::int64_t>(label_rng_.below(k));
            block_ = sample_labeled(*generator_, labels, label_rng_.next_u64());
            block_pos_ = 0;
        }
        batch = Batch{block_.samples.narrow(0, block_pos_, bs), block_.labels.narrow(0, block_pos_, bs), true};
        block_pos_ += bs;
        ++generated_;
    } else {
        batch = real_stream_.next();
        ++real_;
    }
    if (observer_) observer_(batch);
    return batch;
}

LabeledDataset materialize_mixture(MixtureSampler& sampler, std::int64_t n) {
    if (n < 1) throw ArgumentError("materialize_mixture needs n >= 1");
    std::vector<torch::Tensor> xs, ys;
    std::int64_t have = 0;
    while (have < n) {
        auto b = sampler.next_batch();
        const auto take = std::min<std::int64_t>(b.labels.size(0), n - have);
        xs.push_back(b.samples.narrow(0, 0, take));
        ys.push_back(b.labels.narrow(0, 0, take));
        have += take;
    }
    return LabeledDataset{torch::cat(xs, 0).contiguous(), torch::cat(ys, 0).contiguous(), sampler.num_classes()};
}

}  // namespace fitcap
