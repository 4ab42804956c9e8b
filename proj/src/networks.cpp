#include "fitcap/networks.hpp"

#include <cmath>

#include "fitcap/errors.hpp"

namespace fitcap::nets {

namespace nn = torch::nn;

namespace {

std::vector<std::int64_t> shape_of(const torch::Tensor& t) { return t.sizes().vec(); }

template <class Fn>
void for_each_layer(nn::Module& module, Fn&& fn) {
    for (auto& m : module.modules(/*include_self=*/true)) fn(*m);
}

// fan_in as torch computes it: dim 1 times the receptive field.
double fan_in(const torch::Tensor& w) {
    double f = static_cast<double>(w.size(1));
    for (std::int64_t d = 2; d < w.dim(); ++d) f *= static_cast<double>(w.size(d));
    return f;
}

}  // namespace

void init_dcgan(nn::Module& module, torch::Generator& gen) {
    torch::NoGradGuard guard;
    for_each_layer(module, [&](nn::Module& m) {
        if (auto* l = m.as<nn::Linear>()) {
            l->weight.normal_(0.0, 0.02, gen);
            l->bias.zero_();
        } else if (auto* c = m.as<nn::Conv2d>()) {
            c->weight.normal_(0.0, 0.02, gen);
            c->bias.zero_();
        } else if (auto* t = m.as<nn::ConvTranspose2d>()) {
            t->weight.normal_(0.0, 0.02, gen);
            t->bias.zero_();
        }
    });
}

void init_default(nn::Module& module, torch::Generator& gen) {
    torch::NoGradGuard guard;
    auto uniform = [&](torch::Tensor& w, torch::Tensor& b) {
        const double bound = 1.0 / std::sqrt(fan_in(w));
        w.uniform_(-bound, bound, gen);
        if (b.defined()) b.uniform_(-bound, bound, gen);
    };
    for_each_layer(module, [&](nn::Module& m) {
        if (auto* l = m.as<nn::Linear>()) {
            uniform(l->weight, l->bias);
        } else if (auto* c = m.as<nn::Conv2d>()) {
            uniform(c->weight, c->bias);
        } else if (auto* t = m.as<nn::ConvTranspose2d>()) {
            uniform(t->weight, t->bias);
        }
    });
}

torch::Tensor dropout(const torch::Tensor& x, double p, bool training, torch::Generator* gen) {
    if (!training || p <= 0.0) return x;
    const double keep = 1.0 - p;
    auto mask = torch::empty_like(x);
    if (gen != nullptr) {
        mask.bernoulli_(keep, *gen);
    } else {
        mask.bernoulli_(keep);
    }
    return x * mask / keep;
}

torch::Tensor one_hot(const torch::Tensor& labels, std::int64_t num_classes) {
    return torch::one_hot(labels, num_classes).to(torch::kFloat32);
}

torch::Tensor label_planes(const torch::Tensor& labels, std::int64_t num_classes, std::int64_t h,
                           std::int64_t w) {
    return nets::one_hot(labels, num_classes).view({-1, num_classes, 1, 1}).expand({-1, num_classes, h, w});
}

// --- generator -------------------------------------------------------------

ImageGeneratorImpl::ImageGeneratorImpl(std::int64_t in) : input_dim(in) {
    fc1 = register_module("fc1", nn::Linear(in, kHidden));
    bn1 = register_module("bn1", nn::BatchNorm1d(kHidden));
    fc2 = register_module("fc2", nn::Linear(kHidden, kBaseChannels * 7 * 7));
    bn2 = register_module("bn2", nn::BatchNorm1d(kBaseChannels * 7 * 7));
    deconv1 = register_module(
        "deconv1", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(kBaseChannels, 64, 4).stride(2).padding(1)));
    bn3 = register_module("bn3", nn::BatchNorm2d(64));
    deconv2 =
        register_module("deconv2", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(64, 1, 4).stride(2).padding(1)));
}

torch::Tensor ImageGeneratorImpl::forward(const torch::Tensor& z) {
    auto h = torch::relu(bn1(fc1(z)));
    h = torch::relu(bn2(fc2(h))).view({-1, kBaseChannels, 7, 7});
    h = torch::relu(bn3(deconv1(h)));
    return torch::sigmoid(deconv2(h));
}

ShapeTrace ImageGeneratorImpl::shape_trace(const torch::Tensor& z) {
    ShapeTrace trace;
    auto h = torch::relu(bn1(fc1(z)));
    trace.emplace_back("fc1+bn+relu", shape_of(h));
    h = torch::relu(bn2(fc2(h)));
    trace.emplace_back("fc2+bn+relu", shape_of(h));
    h = h.view({-1, kBaseChannels, 7, 7});
    trace.emplace_back("reshape", shape_of(h));
    h = torch::relu(bn3(deconv1(h)));
    trace.emplace_back("deconv1+bn+relu", shape_of(h));
    h = torch::sigmoid(deconv2(h));
    trace.emplace_back("deconv2+sigmoid", shape_of(h));
    return trace;
}

// --- discriminators ----------------------------------------------------------

DiscriminatorImpl::DiscriminatorImpl(std::int64_t input_channels) {
    conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(input_channels, 64, 4).stride(2).padding(1)));
    conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(64, 128, 4).stride(2).padding(1)));
    bn2 = register_module("bn2", nn::BatchNorm2d(128));
    fc1 = register_module("fc1", nn::Linear(128 * 7 * 7, kHidden));
    bn3 = register_module("bn3", nn::BatchNorm1d(kHidden));
    fc2 = register_module("fc2", nn::Linear(kHidden, 1));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
    auto h = torch::leaky_relu(conv1(x), 0.2);
    h = torch::leaky_relu(bn2(conv2(h)), 0.2).flatten(1);
    h = torch::leaky_relu(bn3(fc1(h)), 0.2);
    return fc2(h).view({-1});
}

AutoencoderDiscriminatorImpl::AutoencoderDiscriminatorImpl() {
    conv = register_module("conv", nn::Conv2d(nn::Conv2dOptions(1, 64, 4).stride(2).padding(1)));
    fc1 = register_module("fc1", nn::Linear(64 * 14 * 14, 32));
    bn1 = register_module("bn1", nn::BatchNorm1d(32));
    fc2 = register_module("fc2", nn::Linear(32, 64 * 14 * 14));
    bn2 = register_module("bn2", nn::BatchNorm1d(64 * 14 * 14));
    deconv = register_module("deconv", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(64, 1, 4).stride(2).padding(1)));
}

torch::Tensor AutoencoderDiscriminatorImpl::forward(const torch::Tensor& x) {
    auto h = torch::relu(conv(x)).flatten(1);
    h = torch::relu(bn1(fc1(h)));
    h = torch::relu(bn2(fc2(h))).view({-1, 64, 14, 14});
    return torch::sigmoid(deconv(h));
}

VaeEncoderImpl::VaeEncoderImpl(std::int64_t input_dim, std::int64_t latent) : latent_dim(latent) {
    fc1 = register_module("fc1", nn::Linear(input_dim, kHidden));
    fc2 = register_module("fc2", nn::Linear(kHidden, 2 * latent));
}

std::pair<torch::Tensor, torch::Tensor> VaeEncoderImpl::forward(const torch::Tensor& x_flat) {
    auto stats = fc2(torch::relu(fc1(x_flat)));
    auto parts = stats.chunk(2, 1);
    return {parts[0], parts[1]};
}

// --- classifiers -------------------------------------------------------------

std::string to_string(ArchitectureId id) { return id == ArchitectureId::mnist ? "mnist" : "fashion"; }

ArchitectureId parse_architecture(const std::string& name) {
    if (name == "mnist" || name == "synthetic") return ArchitectureId::mnist;
    if (name == "fashion") return ArchitectureId::fashion;
    throw ArgumentError("unknown classifier architecture '" + name + "'");
}

std::int64_t feature_dim(ArchitectureId id) { return id == ArchitectureId::mnist ? 320 : 512; }

ProxyClassifierImpl::ProxyClassifierImpl(ArchitectureId a, std::int64_t k) : arch(a), num_classes(k) {
    const std::int64_t c1 = arch == ArchitectureId::mnist ? 10 : 16;
    const std::int64_t c2 = arch == ArchitectureId::mnist ? 20 : 32;
    conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(1, c1, 5)));
    conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(c1, c2, 5)));
    if (arch == ArchitectureId::mnist) {
        fc1 = register_module("fc1", nn::Linear(feature_dim(arch), 50));
        fc2 = register_module("fc2", nn::Linear(50, k));
    } else {
        fc1 = register_module("fc1", nn::Linear(feature_dim(arch), k));
    }
}

torch::Tensor ProxyClassifierImpl::features(const torch::Tensor& x) {
    auto h = torch::relu(torch::max_pool2d(conv1(x), 2));
    h = torch::relu(torch::max_pool2d(conv2(h), 2));
    return h.flatten(1);
}

torch::Tensor ProxyClassifierImpl::forward(const torch::Tensor& x, torch::Generator* gen) {
    auto h = dropout(features(x), 0.5, is_training(), gen);
    if (arch == ArchitectureId::mnist) {
        h = fc2(torch::relu(fc1(h)));
    } else {
        h = fc1(h);
    }
    return torch::log_softmax(h, 1);
}

ShapeTrace ProxyClassifierImpl::shape_trace(const torch::Tensor& x) {
    ShapeTrace trace;
    auto h = torch::relu(torch::max_pool2d(conv1(x), 2));
    trace.emplace_back("conv1+pool+relu", shape_of(h));
    h = torch::relu(torch::max_pool2d(conv2(h), 2));
    trace.emplace_back("conv2+pool+relu", shape_of(h));
    h = h.flatten(1);
    trace.emplace_back("flatten", shape_of(h));
    if (arch == ArchitectureId::mnist) {
        h = torch::relu(fc1(h));
        trace.emplace_back("fc1+relu", shape_of(h));
        h = torch::log_softmax(fc2(h), 1);
        trace.emplace_back("fc2+log_softmax", shape_of(h));
    } else {
        h = torch::log_softmax(fc1(h), 1);
        trace.emplace_back("fc1+log_softmax", shape_of(h));
    }
    return trace;
}

std::vector<torch::Tensor> snapshot(nn::Module& module) {
    torch::NoGradGuard guard;
    std::vector<torch::Tensor> state;
    for (const auto& p : module.parameters()) state.push_back(p.detach().clone());
    for (const auto& b : module.buffers()) state.push_back(b.detach().clone());
    return state;
}

void restore(nn::Module& module, const std::vector<torch::Tensor>& state) {
    torch::NoGradGuard guard;
    std::size_t i = 0;
    for (auto& p : module.parameters()) p.copy_(state.at(i++));
    for (auto& b : module.buffers()) b.copy_(state.at(i++));
}

std::int64_t parameter_count(nn::Module& module) {
    std::int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

}  // namespace fitcap::nets
