#include <chrono>
#include <cmath>
#include <numeric>

#include "fitcap/errors.hpp"
#include "fitcap/generative.hpp"
#include "fitcap/log.hpp"
#include "fitcap/optim.hpp"
#include "fitcap/rng.hpp"
#include "fitcap/seeding.hpp"

namespace fitcap {

namespace {

namespace F = torch::nn::functional;

// Shuffled mini-batches for one epoch. Batches of a single sample are
// dropped: batch normalisation needs at least two values per channel.
std::vector<torch::Tensor> epoch_batches(std::int64_t n, int batch_size, Rng& rng) {
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), std::int64_t{0});
    rng.shuffle(perm);
    auto all = torch::tensor(perm, torch::kInt64);
    std::vector<torch::Tensor> out;
    for (std::int64_t start = 0; start < n; start += batch_size) {
        const auto len = std::min<std::int64_t>(batch_size, n - start);
        if (len >= 2) out.push_back(all.narrow(0, start, len));
    }
    return out;
}

FusedAdam adam(std::vector<torch::Tensor> params, const GeneratorConfig& c) {
    return FusedAdam(std::move(params), c.learning_rate, c.beta1, c.beta2);
}

std::vector<torch::Tensor> join(std::vector<torch::Tensor> a, const std::vector<torch::Tensor>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

struct TrainContext {
    NetworkGenerator& generator;
    const LabeledDataset& data;
    const GeneratorConfig& config;
    torch::Generator noise;
    Rng batch_rng;

    std::vector<double> loss_trace;
    std::vector<double> aux_trace;
    TrainingStatus status;

    torch::Tensor latent(std::int64_t n) { return torch::randn({n, config.latent_dim}, noise); }

    // Conditioning: one-hot appended to latent / flat inputs, label planes
    // stacked onto image inputs.
    torch::Tensor with_label(const torch::Tensor& v, const torch::Tensor& y) const {
        if (!config.conditional) return v;
        return torch::cat({v, nets::one_hot(y, data.num_classes)}, 1);
    }
    torch::Tensor with_planes(const torch::Tensor& img, const torch::Tensor& y) const {
        if (!config.conditional) return img;
        return torch::cat({img, nets::label_planes(y, data.num_classes, img.size(2), img.size(3))}, 1);
    }

    bool check(const torch::Tensor& loss, int epoch, std::size_t batch) {
        const double v = loss.item<double>();
        if (std::isfinite(v)) return true;
        status.flag("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch));
        return false;
    }

    void end_epoch(int epoch, double loss, double aux) {
        loss_trace.push_back(loss);
        aux_trace.push_back(aux);
        log::debug(to_string(config.family), " seed ", config.seed, " epoch ", epoch + 1, "/", config.epochs,
                   " loss ", loss, " aux ", aux);
    }
};

void train_vae(TrainContext& ctx) {
    auto& dec = ctx.generator.network();
    const auto k = ctx.config.conditional ? ctx.data.num_classes : 0;
    nets::VaeEncoder enc(ctx.data.sample_numel() + k, ctx.config.latent_dim);
    auto init_gen = make_torch_generator(derive_seed(ctx.config.seed, "encoder/init"));
    nets::init_default(*enc, init_gen);
    auto opt = adam(join(enc->parameters(), dec->parameters()), ctx.config);
    enc->train();
    dec->train();

    for (int epoch = 0; epoch < ctx.config.epochs; ++epoch) {
        double sum = 0.0;
        std::size_t count = 0;
        const auto batches = epoch_batches(ctx.data.size(), ctx.config.batch_size, ctx.batch_rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            auto x = ctx.data.samples.index_select(0, batches[b]);
            auto y = ctx.data.labels.index_select(0, batches[b]);
            const double n = static_cast<double>(x.size(0));
            auto [mu, logvar] = enc->forward(ctx.with_label(x.flatten(1), y));
            auto eps = torch::randn(mu.sizes(), ctx.noise);
            auto z = mu + eps * torch::exp(0.5 * logvar);
            auto recon = dec->forward(ctx.with_label(z, y));
            auto rec_loss = F::binary_cross_entropy(recon, x, F::BinaryCrossEntropyFuncOptions().reduction(torch::kSum)) / n;
            auto kl = -0.5 * torch::sum(1 + logvar - mu.pow(2) - logvar.exp()) / n;
            auto loss = rec_loss + kl;
            if (!ctx.check(loss, epoch, b)) {
                ctx.end_epoch(epoch, std::nan(""), std::nan(""));
                return;
            }
            opt.zero_grad();
            loss.backward();
            opt.step();
            sum += loss.item<double>();
            ++count;
        }
        ctx.end_epoch(epoch, count ? sum / static_cast<double>(count) : std::nan(""), std::nan(""));
    }
}

void train_gan(TrainContext& ctx) {
    auto& gen = ctx.generator.network();
    const auto k = ctx.config.conditional ? ctx.data.num_classes : 0;
    nets::Discriminator disc(1 + k);
    auto init_gen = make_torch_generator(derive_seed(ctx.config.seed, "discriminator/init"));
    nets::init_dcgan(*disc, init_gen);
    auto opt_d = adam(disc->parameters(), ctx.config);
    auto opt_g = adam(gen->parameters(), ctx.config);
    gen->train();
    disc->train();

    for (int epoch = 0; epoch < ctx.config.epochs; ++epoch) {
        double g_sum = 0.0, d_sum = 0.0;
        std::size_t count = 0;
        const auto batches = epoch_batches(ctx.data.size(), ctx.config.batch_size, ctx.batch_rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            auto x = ctx.data.samples.index_select(0, batches[b]);
            auto y = ctx.data.labels.index_select(0, batches[b]);
            const auto n = x.size(0);
            auto ones = torch::ones({n});
            auto zeros = torch::zeros({n});

            auto fake = gen->forward(ctx.with_label(ctx.latent(n), y));
            auto d_real = disc->forward(ctx.with_planes(x, y));
            auto d_fake = disc->forward(ctx.with_planes(fake.detach(), y));
            auto loss_d = F::binary_cross_entropy_with_logits(d_real, ones) +
                          F::binary_cross_entropy_with_logits(d_fake, zeros);
            if (!ctx.check(loss_d, epoch, b)) {
                ctx.end_epoch(epoch, std::nan(""), std::nan(""));
                return;
            }
            opt_d.zero_grad();
            loss_d.backward();
            opt_d.step();

            auto loss_g = F::binary_cross_entropy_with_logits(disc->forward(ctx.with_planes(fake, y)), ones);
            if (!ctx.check(loss_g, epoch, b)) {
                ctx.end_epoch(epoch, std::nan(""), std::nan(""));
                return;
            }
            opt_g.zero_grad();
            loss_g.backward();
            opt_g.step();

            g_sum += loss_g.item<double>();
            d_sum += loss_d.item<double>();
            ++count;
        }
        const double c = static_cast<double>(count);
        ctx.end_epoch(epoch, count ? g_sum / c : std::nan(""), count ? d_sum / c : std::nan(""));
    }
}

void train_wgan(TrainContext& ctx) {
    auto& gen = ctx.generator.network();
    nets::Discriminator critic(1);
    auto init_gen = make_torch_generator(derive_seed(ctx.config.seed, "discriminator/init"));
    nets::init_dcgan(*critic, init_gen);
    auto opt_d = adam(critic->parameters(), ctx.config);
    auto opt_g = adam(gen->parameters(), ctx.config);
    const double clip = ctx.config.param("clip", 0.01);
    const auto critic_steps = static_cast<std::int64_t>(ctx.config.param("critic_steps", 5));
    if (critic_steps < 1) throw ArgumentError("WGAN critic_steps must be >= 1");
    gen->train();
    critic->train();

    std::int64_t step = 0;
    auto generator_step = [&](std::int64_t n) {
        auto loss_g = -critic->forward(gen->forward(ctx.latent(n))).mean();
        opt_g.zero_grad();
        loss_g.backward();
        opt_g.step();
        return loss_g;
    };

    for (int epoch = 0; epoch < ctx.config.epochs; ++epoch) {
        double g_sum = 0.0, d_sum = 0.0;
        std::size_t g_count = 0, d_count = 0;
        const auto batches = epoch_batches(ctx.data.size(), ctx.config.batch_size, ctx.batch_rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            auto x = ctx.data.samples.index_select(0, batches[b]);
            const auto n = x.size(0);
            torch::Tensor fake;
            {
                torch::NoGradGuard guard;
                fake = gen->forward(ctx.latent(n));
            }
            auto loss_d = critic->forward(fake).mean() - critic->forward(x).mean();
            if (!ctx.check(loss_d, epoch, b)) {
                ctx.end_epoch(epoch, std::nan(""), std::nan(""));
                return;
            }
            opt_d.zero_grad();
            loss_d.backward();
            opt_d.step();
            {
                torch::NoGradGuard guard;
                for (auto& p : critic->parameters()) p.clamp_(-clip, clip);
            }
            d_sum += loss_d.item<double>();
            ++d_count;

            if (++step % critic_steps == 0) {
                auto loss_g = generator_step(n);
                if (!ctx.check(loss_g, epoch, b)) {
                    ctx.end_epoch(epoch, std::nan(""), std::nan(""));
                    return;
                }
                g_sum += loss_g.item<double>();
                ++g_count;
            }
        }
        if (g_count == 0) {
            // Fewer batches than critic steps in this epoch: still move G once.
            auto loss_g = generator_step(ctx.config.batch_size);
            if (!ctx.check(loss_g, epoch, batches.size())) {
                ctx.end_epoch(epoch, std::nan(""), std::nan(""));
                return;
            }
            g_sum += loss_g.item<double>();
            ++g_count;
        }
        ctx.end_epoch(epoch, g_sum / static_cast<double>(g_count),
                      d_count ? d_sum / static_cast<double>(d_count) : std::nan(""));
    }
}

void train_began(TrainContext& ctx) {
    auto& gen = ctx.generator.network();
    nets::AutoencoderDiscriminator disc;
    auto init_gen = make_torch_generator(derive_seed(ctx.config.seed, "discriminator/init"));
    nets::init_dcgan(*disc, init_gen);
    auto opt_d = adam(disc->parameters(), ctx.config);
    auto opt_g = adam(gen->parameters(), ctx.config);
    const double gamma = ctx.config.param("gamma", 0.75);
    const double lambda_k = ctx.config.param("lambda_k", 0.001);
    double k_t = 0.0;
    gen->train();
    disc->train();

    for (int epoch = 0; epoch < ctx.config.epochs; ++epoch) {
        double m_sum = 0.0, d_sum = 0.0;
        std::size_t count = 0;
        const auto batches = epoch_batches(ctx.data.size(), ctx.config.batch_size, ctx.batch_rng);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            auto x = ctx.data.samples.index_select(0, batches[b]);
            const auto n = x.size(0);

            auto fake = gen->forward(ctx.latent(n));
            auto loss_real = torch::mean(torch::abs(x - disc->forward(x)));
            auto fake_d = fake.detach();
            auto loss_fake = torch::mean(torch::abs(fake_d - disc->forward(fake_d)));
            auto loss_d = loss_real - k_t * loss_fake;
            if (!ctx.check(loss_d, epoch, b)) {
                ctx.end_epoch(epoch, std::nan(""), std::nan(""));
                return;
            }
            opt_d.zero_grad();
            loss_d.backward();
            opt_d.step();

            auto loss_g = torch::mean(torch::abs(fake - disc->forward(fake)));
            if (!ctx.check(loss_g, epoch, b)) {
                ctx.end_epoch(epoch, std::nan(""), std::nan(""));
                return;
            }
            opt_g.zero_grad();
            loss_g.backward();
            opt_g.step();

            const double lr = loss_real.item<double>();
            const double lg = loss_g.item<double>();
            k_t = std::clamp(k_t + lambda_k * (gamma * lr - lg), 0.0, 1.0);
            // Convergence measure: L(x) + |gamma L(x) - L(G(z))|.
            m_sum += lr + std::abs(gamma * lr - lg);
            d_sum += loss_d.item<double>();
            ++count;
        }
        const double c = static_cast<double>(count);
        ctx.end_epoch(epoch, count ? m_sum / c : std::nan(""), count ? d_sum / c : std::nan(""));
    }
}

}  // namespace

std::shared_ptr<NetworkGenerator> train_generator(Family family, const LabeledDataset& train,
                                                  GeneratorConfig config) {
    if (!is_network_family(family)) throw ArgumentError(to_string(family) + " is not a trainable family");
    config.family = family;
    config.validate();
    validate(train);
    if (train.sample_shape() != std::vector<std::int64_t>{1, nets::kImageSide, nets::kImageSide}) {
        throw ArgumentError("generators produce 1x28x28 images; training data has another shape");
    }

    const auto started = std::chrono::steady_clock::now();
    auto generator = std::make_shared<NetworkGenerator>(config, train.num_classes);
    TrainContext ctx{*generator, train, config, make_torch_generator(derive_seed(config.seed, "generator/noise")),
                     Rng(derive_seed(config.seed, "generator/batches")), {}, {}, {}};

    switch (family) {
        case Family::VAE:
        case Family::CVAE:
            train_vae(ctx);
            break;
        case Family::GAN:
        case Family::CGAN:
            train_gan(ctx);
            break;
        case Family::WGAN:
            train_wgan(ctx);
            break;
        case Family::BEGAN:
            train_began(ctx);
            break;
        default:
            break;
    }
    generator->network()->eval();
    generator->set_traces(std::move(ctx.loss_trace), std::move(ctx.aux_trace));
    generator->mutable_status() = ctx.status;

    if (!generator->status().failed) {
        const double var = output_variance(*generator, derive_seed(config.seed, "generator/probe"));
        if (!(var >= kCollapseVariance)) {
            generator->mutable_status().flag("collapsed output variance " + std::to_string(var));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log::info("trained ", to_string(family), " (seed ", config.seed, ", n=", train.size(), ") in ", secs, "s",
              generator->status().failed ? " [FAILED]" : "");
    return generator;
}

std::shared_ptr<ClasswiseEnsemble> train_classwise_ensemble(Family family, const LabeledDataset& train,
                                                            GeneratorConfig config) {
    if (is_conditional(family) || !is_network_family(family)) {
        throw ArgumentError("class-wise ensembles are built from unconditional families (VAE, GAN, WGAN, BEGAN)");
    }
    validate(train);
    const auto counts = train.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) throw ArgumentError("class " + std::to_string(k) + " has no training samples");
    }
    std::vector<std::shared_ptr<NetworkGenerator>> members;
    for (int k = 0; k < train.num_classes; ++k) {
        auto member_config = config;
        member_config.seed = derive_seed(config.seed, "class", static_cast<std::uint64_t>(k));
        auto subset = train.class_subset(k);
        members.push_back(train_generator(family, subset, member_config));
    }
    return std::make_shared<ClasswiseEnsemble>(std::move(members));
}

GeneratorPtr build_generator(Family family, const LabeledDataset& train, const GeneratorConfig& config) {
    switch (family) {
        case Family::CVAE:
        case Family::CGAN:
            return train_generator(family, train, config);
        case Family::VAE:
        case Family::GAN:
        case Family::WGAN:
        case Family::BEGAN:
            return train_classwise_ensemble(family, train, config);
        case Family::Replay:
            return std::make_shared<ReplayGenerator>(train);
        case Family::Noise:
            return std::make_shared<NoiseGenerator>(train.num_classes);
        case Family::LabelScramble:
            return std::make_shared<LabelScrambleGenerator>(train);
    }
    throw ArgumentError("unhandled family");
}

}  // namespace fitcap
