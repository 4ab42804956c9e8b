#include "fitcap/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "fitcap/errors.hpp"
#include "fitcap/rng.hpp"

namespace fitcap {

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::filesystem::path& path) {
    std::array<unsigned char, 4> b{};
    in.read(reinterpret_cast<char*>(b.data()), 4);
    if (in.gcount() != 4) {
        throw IoError("truncated IDX header in " + path.string());
    }
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
           (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                                static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    out.write(b.data(), 4);
}

std::ifstream open_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::vector<unsigned char> read_payload(std::istream& in, std::size_t bytes,
                                        const std::filesystem::path& path) {
    std::vector<unsigned char> buf(bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) {
        throw IoError("truncated IDX payload in " + path.string() + ": expected " +
                      std::to_string(bytes) + " bytes, got " + std::to_string(in.gcount()));
    }
    return buf;
}

std::string magic_hex(std::uint32_t m) {
    std::ostringstream os;
    os << "0x" << std::hex << m;
    return os.str();
}

}  // namespace

std::vector<std::int64_t> LabeledDataset::sample_shape() const {
    auto sizes = samples.sizes();
    return {sizes.begin() + 1, sizes.end()};
}

std::int64_t LabeledDataset::sample_numel() const {
    const auto shape = sample_shape();
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

LabeledDataset LabeledDataset::subset(const std::vector<std::int64_t>& indices) const {
    auto idx = torch::tensor(indices, torch::kInt64);
    return subset(idx);
}

LabeledDataset LabeledDataset::subset(const torch::Tensor& indices) const {
    return LabeledDataset{samples.index_select(0, indices).contiguous(),
                          labels.index_select(0, indices).contiguous(), num_classes};
}

LabeledDataset LabeledDataset::class_subset(int label) const {
    auto idx = torch::nonzero(labels == label).flatten();
    return subset(idx);
}

std::vector<std::int64_t> LabeledDataset::class_counts() const {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
    if (empty()) return counts;
    auto bc = torch::bincount(labels, {}, num_classes);
    auto acc = bc.accessor<std::int64_t, 1>();
    for (int k = 0; k < num_classes; ++k) counts[static_cast<std::size_t>(k)] = acc[k];
    return counts;
}

void validate(const LabeledDataset& data, bool allow_empty) {
    if (data.num_classes < 2) {
        throw ArgumentError("dataset needs num_classes >= 2, got " + std::to_string(data.num_classes));
    }
    if (!data.samples.defined() || !data.labels.defined()) {
        throw ArgumentError("dataset tensors are undefined");
    }
    if (data.samples.dim() != 4) throw ArgumentError("samples must be (N, C, H, W)");
    if (data.labels.dim() != 1) throw ArgumentError("labels must be one-dimensional");
    if (data.samples.scalar_type() != torch::kFloat32) throw ArgumentError("samples must be float32");
    if (data.labels.scalar_type() != torch::kInt64) throw ArgumentError("labels must be int64");
    if (data.samples.size(0) != data.labels.size(0)) {
        throw ArgumentError("samples and labels disagree on N: " + std::to_string(data.samples.size(0)) +
                            " vs " + std::to_string(data.labels.size(0)));
    }
    if (data.empty()) {
        if (allow_empty) return;
        throw ArgumentError("dataset is empty");
    }
    const float lo = data.samples.min().item<float>();
    const float hi = data.samples.max().item<float>();
    if (!(lo >= 0.0f && hi <= 1.0f)) {
        throw ArgumentError("sample values outside [0,1]: min " + std::to_string(lo) + ", max " +
                            std::to_string(hi));
    }
    const auto lmin = data.labels.min().item<std::int64_t>();
    const auto lmax = data.labels.max().item<std::int64_t>();
    if (lmin < 0 || lmax >= data.num_classes) {
        throw ArgumentError("label outside {0.." + std::to_string(data.num_classes - 1) + "}");
    }
}

LabeledDataset make_dataset(torch::Tensor samples, torch::Tensor labels, int num_classes) {
    LabeledDataset d{samples.to(torch::kFloat32).contiguous(), labels.to(torch::kInt64).contiguous(),
                     num_classes};
    validate(d, /*allow_empty=*/true);
    return d;
}

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path, int num_classes) {
    auto img = open_binary(images_path);
    const auto img_magic = read_be_u32(img, images_path);
    if (img_magic != kIdxImageMagic) {
        throw FormatError(images_path.string() + ": image magic " + magic_hex(img_magic) +
                          ", expected " + magic_hex(kIdxImageMagic));
    }
    const auto n_img = read_be_u32(img, images_path);
    const auto rows = read_be_u32(img, images_path);
    const auto cols = read_be_u32(img, images_path);

    auto lab = open_binary(labels_path);
    const auto lab_magic = read_be_u32(lab, labels_path);
    if (lab_magic != kIdxLabelMagic) {
        throw FormatError(labels_path.string() + ": label magic " + magic_hex(lab_magic) +
                          ", expected " + magic_hex(kIdxLabelMagic));
    }
    const auto n_lab = read_be_u32(lab, labels_path);
    if (n_img != n_lab) {
        throw ConsistencyError("image count " + std::to_string(n_img) + " != label count " +
                               std::to_string(n_lab));
    }

    const std::size_t pixels = std::size_t{n_img} * rows * cols;
    const auto pix = read_payload(img, pixels, images_path);
    const auto lbl = read_payload(lab, n_lab, labels_path);

    auto samples = torch::empty({static_cast<std::int64_t>(n_img), 1, static_cast<std::int64_t>(rows),
                                 static_cast<std::int64_t>(cols)},
                                torch::kFloat32);
    float* dst = samples.data_ptr<float>();
    for (std::size_t i = 0; i < pixels; ++i) dst[i] = static_cast<float>(pix[i]) / 255.0f;

    auto labels = torch::empty({static_cast<std::int64_t>(n_lab)}, torch::kInt64);
    auto* ldst = labels.data_ptr<std::int64_t>();
    for (std::size_t i = 0; i < lbl.size(); ++i) ldst[i] = lbl[i];

    LabeledDataset d{samples, labels, num_classes};
    validate(d);
    return d;
}

void write_idx(const LabeledDataset& data, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
    validate(data, /*allow_empty=*/true);
    if (data.samples.size(1) != 1) throw ArgumentError("IDX export supports single-channel images only");
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!img || !lab) throw IoError("cannot write IDX files at " + images_path.string());

    const auto n = static_cast<std::uint32_t>(data.size());
    write_be_u32(img, kIdxImageMagic);
    write_be_u32(img, n);
    write_be_u32(img, static_cast<std::uint32_t>(data.samples.size(2)));
    write_be_u32(img, static_cast<std::uint32_t>(data.samples.size(3)));
    auto bytes = torch::round(data.samples.contiguous() * 255.0f).to(torch::kUInt8).contiguous();
    img.write(reinterpret_cast<const char*>(bytes.data_ptr<std::uint8_t>()), bytes.numel());

    write_be_u32(lab, kIdxLabelMagic);
    write_be_u32(lab, n);
    auto lb = data.labels.to(torch::kUInt8).contiguous();
    lab.write(reinterpret_cast<const char*>(lb.data_ptr<std::uint8_t>()), lb.numel());
    if (!img || !lab) throw IoError("short write to " + images_path.string());
}

SplitIndices split_indices(std::int64_t n, std::int64_t valid_count, std::uint64_t seed) {
    if (valid_count <= 0 || valid_count >= n) {
        throw ArgumentError("valid_count must satisfy 0 < valid_count < N (N=" + std::to_string(n) +
                            ", valid_count=" + std::to_string(valid_count) + ")");
    }
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), std::int64_t{0});
    Rng rng(seed);
    rng.shuffle(perm);
    SplitIndices out;
    out.valid.assign(perm.begin(), perm.begin() + valid_count);
    out.train.assign(perm.begin() + valid_count, perm.end());
    return out;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& source,
                                                        std::int64_t valid_count, std::uint64_t seed) {
    validate(source);
    const auto idx = split_indices(source.size(), valid_count, seed);
    return {source.subset(idx.train), source.subset(idx.valid)};
}

namespace {

torch::Tensor synthetic_means(const SyntheticSpec& spec, torch::Generator& gen) {
    return torch::rand({spec.num_classes, spec.dims}, gen, torch::kFloat64) *
               (spec.mean_high - spec.mean_low) +
           spec.mean_low;
}

LabeledDataset draw_synthetic(const SyntheticSpec& spec, const torch::Tensor& means, int per_class,
                              torch::Generator& gen) {
    const std::int64_t n = std::int64_t{spec.num_classes} * per_class;
    auto labels = torch::arange(spec.num_classes, torch::kInt64).repeat_interleave(per_class);
    auto noise = torch::randn({n, spec.dims}, gen, torch::kFloat64) * spec.noise_std;
    auto x = (means.index_select(0, labels) + noise).clamp(0.0, 1.0).to(torch::kFloat32);
    if (spec.dims == 28 * 28) {
        x = x.view({n, 1, 28, 28});
    } else {
        x = x.view({n, 1, 1, spec.dims});
    }
    return LabeledDataset{x.contiguous(), labels, spec.num_classes};
}

void check_spec(const SyntheticSpec& spec, int per_class) {
    if (spec.num_classes < 2) throw ArgumentError("synthetic data needs K >= 2");
    if (spec.dims < 1) throw ArgumentError("synthetic data needs dims >= 1");
    if (per_class < 1) throw ArgumentError("synthetic data needs per_class >= 1");
    if (!(spec.noise_std >= 0.0)) throw ArgumentError("noise_std must be non-negative");
    if (!(spec.mean_low >= 0.0 && spec.mean_high <= 1.0 && spec.mean_low <= spec.mean_high)) {
        throw ArgumentError("synthetic mean range must lie inside [0,1]");
    }
}

}  // namespace

LabeledDataset make_synthetic_gaussian(int num_classes, int dims, int per_class, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.num_classes = num_classes;
    spec.dims = dims;
    spec.per_class = per_class;
    return make_synthetic_gaussian(spec, seed);
}

LabeledDataset make_synthetic_gaussian(const SyntheticSpec& spec, std::uint64_t seed) {
    check_spec(spec, spec.per_class);
    auto gen = make_torch_generator(seed);
    const auto means = synthetic_means(spec, gen);
    return draw_synthetic(spec, means, spec.per_class, gen);
}

std::pair<LabeledDataset, LabeledDataset> make_synthetic_pair(const SyntheticSpec& spec,
                                                              int test_per_class, std::uint64_t seed) {
    check_spec(spec, spec.per_class);
    check_spec(spec, test_per_class);
    auto gen = make_torch_generator(seed);
    const auto means = synthetic_means(spec, gen);
    auto train = draw_synthetic(spec, means, spec.per_class, gen);
    auto test = draw_synthetic(spec, means, test_per_class, gen);
    return {std::move(train), std::move(test)};
}

}  // namespace fitcap
