#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace fitcap::nets {

// (layer name, output shape) pairs recorded by the shape-trace helpers.
using ShapeTrace = std::vector<std::pair<std::string, std::vector<std::int64_t>>>;

inline constexpr std::int64_t kImageSide = 28;
inline constexpr std::int64_t kHidden = 1024;
inline constexpr std::int64_t kBaseChannels = 128;  // 128 x 7 x 7 seed map

// Weight initialisation draws from an explicit generator so that models built
// on different threads never touch libtorch's global RNG.
void init_dcgan(torch::nn::Module& module, torch::Generator& gen);
void init_default(torch::nn::Module& module, torch::Generator& gen);

// Inverted dropout with an explicit generator (torch::dropout draws from the
// global generator).
torch::Tensor dropout(const torch::Tensor& x, double p, bool training, torch::Generator* gen);

torch::Tensor one_hot(const torch::Tensor& labels, std::int64_t num_classes);
// One-hot labels broadcast to (N, K, H, W) planes for convolutional inputs.
torch::Tensor label_planes(const torch::Tensor& labels, std::int64_t num_classes, std::int64_t h,
                           std::int64_t w);

// ---------------------------------------------------------------------------
// Generator / VAE decoder:
//   FC(in, 1024) + BN + ReLU
//   FC(1024, 128*7*7) + BN + ReLU
//   ConvTranspose2d(128, 64, 4, 2, 1) + BN + ReLU
//   ConvTranspose2d(64, 1, 4, 2, 1) + sigmoid
// in = latent_dim (+ K for conditional models, one-hot appended).
// ---------------------------------------------------------------------------
struct ImageGeneratorImpl : torch::nn::Module {
    explicit ImageGeneratorImpl(std::int64_t input_dim);

    torch::Tensor forward(const torch::Tensor& z);
    ShapeTrace shape_trace(const torch::Tensor& z);

    std::int64_t input_dim;
    torch::nn::Linear fc1{nullptr}, fc2{nullptr};
    torch::nn::BatchNorm1d bn1{nullptr}, bn2{nullptr};
    torch::nn::ConvTranspose2d deconv1{nullptr}, deconv2{nullptr};
    torch::nn::BatchNorm2d bn3{nullptr};
};
TORCH_MODULE(ImageGenerator);

// InfoGAN-style discriminator / WGAN critic, returning one logit per sample:
//   Conv(in, 64, 4, 2, 1) + LReLU(0.2)
//   Conv(64, 128, 4, 2, 1) + BN + LReLU
//   FC(128*7*7, 1024) + BN + LReLU
//   FC(1024, 1)
// in = 1 (+ K label planes when conditional).
struct DiscriminatorImpl : torch::nn::Module {
    explicit DiscriminatorImpl(std::int64_t input_channels);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    torch::nn::BatchNorm2d bn2{nullptr};
    torch::nn::Linear fc1{nullptr}, fc2{nullptr};
    torch::nn::BatchNorm1d bn3{nullptr};
};
TORCH_MODULE(Discriminator);

// BEGAN discriminator: an auto-encoder that returns the reconstruction.
//   Conv(1, 64, 4, 2, 1) + ReLU
//   FC(64*14*14, 32) + BN + ReLU
//   FC(32, 64*14*14) + BN + ReLU
//   ConvTranspose2d(64, 1, 4, 2, 1) + sigmoid
struct AutoencoderDiscriminatorImpl : torch::nn::Module {
    AutoencoderDiscriminatorImpl();
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv{nullptr};
    torch::nn::Linear fc1{nullptr}, fc2{nullptr};
    torch::nn::BatchNorm1d bn1{nullptr}, bn2{nullptr};
    torch::nn::ConvTranspose2d deconv{nullptr};
};
TORCH_MODULE(AutoencoderDiscriminator);

// Two-layer fully connected VAE encoder: FC(784 [+K], 1024) + ReLU,
// FC(1024, 2*latent) split into (mu, logvar).
struct VaeEncoderImpl : torch::nn::Module {
    VaeEncoderImpl(std::int64_t input_dim, std::int64_t latent_dim);
    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x_flat);

    std::int64_t latent_dim;
    torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(VaeEncoder);

// ---------------------------------------------------------------------------
// Proxy classifiers. `features` is the flattened output of layer 2
// (second conv + maxpool + ReLU), used as the FID activation vector.
//
//   mnist:   conv5x5/10 + pool + ReLU, conv5x5/20 + pool + ReLU  -> 320
//            dropout(0.5), FC(320, 50) + ReLU, FC(50, K) + log-softmax
//   fashion: conv5x5/16 + pool + ReLU, conv5x5/32 + pool + ReLU  -> 512
//            dropout(0.5), FC(512, K) + log-softmax
// Valid (unpadded) convolutions: 28 -> 24 -> 12 -> 8 -> 4.
// ---------------------------------------------------------------------------
enum class ArchitectureId { mnist, fashion };

std::string to_string(ArchitectureId id);
ArchitectureId parse_architecture(const std::string& name);
std::int64_t feature_dim(ArchitectureId id);

struct ProxyClassifierImpl : torch::nn::Module {
    ProxyClassifierImpl(ArchitectureId arch, std::int64_t num_classes);

    torch::Tensor features(const torch::Tensor& x);
    // Log-probabilities. `gen` drives dropout in training mode.
    torch::Tensor forward(const torch::Tensor& x, torch::Generator* gen = nullptr);
    ShapeTrace shape_trace(const torch::Tensor& x);

    ArchitectureId arch;
    std::int64_t num_classes;
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
    torch::nn::Linear fc1{nullptr}, fc2{nullptr};  // fc2 unused for fashion
};
TORCH_MODULE(ProxyClassifier);

// Copies of every parameter and buffer, for best-epoch restore.
std::vector<torch::Tensor> snapshot(torch::nn::Module& module);
void restore(torch::nn::Module& module, const std::vector<torch::Tensor>& state);

std::int64_t parameter_count(torch::nn::Module& module);

}  // namespace fitcap::nets
