#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <vector>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "fitcap/dataset.hpp"
#include "fitcap/errors.hpp"
#include "test_util.hpp"

using namespace fitcap;
using fitcap::testing::TempDir;

namespace {

void put_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

struct IdxPair {
    std::filesystem::path images, labels;
};

IdxPair write_raw(const std::filesystem::path& dir, std::uint32_t img_magic, std::uint32_t lab_magic,
                  std::uint32_t n_img, std::uint32_t n_lab, std::uint32_t rows, std::uint32_t cols,
                  std::size_t pixel_bytes, const std::vector<unsigned char>& labels) {
    IdxPair p{dir / "img", dir / "lab"};
    std::ofstream img(p.images, std::ios::binary);
    put_be32(img, img_magic);
    put_be32(img, n_img);
    put_be32(img, rows);
    put_be32(img, cols);
    std::vector<char> pix(pixel_bytes);
    for (std::size_t i = 0; i < pix.size(); ++i) pix[i] = static_cast<char>(i % 256);
    img.write(pix.data(), static_cast<std::streamsize>(pix.size()));
    std::ofstream lab(p.labels, std::ios::binary);
    put_be32(lab, lab_magic);
    put_be32(lab, n_lab);
    lab.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
    return p;
}

}  // namespace

TEST(Idx, ReadsPixelsScaled) {
    TempDir tmp;
    const auto p = write_raw(tmp.path(), kIdxImageMagic, kIdxLabelMagic, 2, 2, 28, 28, 2 * 784, {3, 7});
    const auto d = load_idx(p.images, p.labels);
    ASSERT_EQ(d.size(), 2);
    EXPECT_EQ(d.sample_shape(), (std::vector<std::int64_t>{1, 28, 28}));
    EXPECT_EQ(d.labels[1].item<std::int64_t>(), 7);
    EXPECT_FLOAT_EQ(d.samples[0].flatten()[255].item<float>(), 1.0f);
    EXPECT_FLOAT_EQ(d.samples[0].flatten()[51].item<float>(), 51.0f / 255.0f);
}

TEST(Idx, RoundTripQuantizes) {
    TempDir tmp;
    auto samples = torch::tensor({0.0f, 0.5f, 1.0f, 0.2f}).view({1, 1, 2, 2});
    const auto d = make_dataset(samples, torch::tensor({4}, torch::kInt64), 10);
    write_idx(d, tmp.path() / "i", tmp.path() / "l");
    const auto back = load_idx(tmp.path() / "i", tmp.path() / "l");
    EXPECT_EQ(back.labels[0].item<std::int64_t>(), 4);
    EXPECT_LE((back.samples - d.samples).abs().max().item<float>(), 0.5f / 255.0f + 1e-6f);
}

TEST(Idx, BadMagic) {
    TempDir tmp;
    const auto p = write_raw(tmp.path(), 0x00000802, kIdxLabelMagic, 1, 1, 28, 28, 784, {0});
    EXPECT_THROW(load_idx(p.images, p.labels), FormatError);
    const auto q = write_raw(tmp.path(), kIdxImageMagic, 0x00000803, 1, 1, 28, 28, 784, {0});
    EXPECT_THROW(load_idx(q.images, q.labels), FormatError);
}

TEST(Idx, CountMismatch) {
    TempDir tmp;
    const auto p = write_raw(tmp.path(), kIdxImageMagic, kIdxLabelMagic, 2, 1, 28, 28, 2 * 784, {0});
    EXPECT_THROW(load_idx(p.images, p.labels), ConsistencyError);
}

TEST(Idx, TruncatedPayloadAndHeader) {
    TempDir tmp;
    const auto p = write_raw(tmp.path(), kIdxImageMagic, kIdxLabelMagic, 2, 2, 28, 28, 784 + 100, {0, 1});
    EXPECT_THROW(load_idx(p.images, p.labels), IoError);
    std::ofstream(tmp.path() / "short", std::ios::binary) << "ab";
    EXPECT_THROW(load_idx(tmp.path() / "short", p.labels), IoError);
    EXPECT_THROW(load_idx(tmp.path() / "missing", p.labels), IoError);
}

TEST(Idx, LabelOutOfRange) {
    TempDir tmp;
    const auto p = write_raw(tmp.path(), kIdxImageMagic, kIdxLabelMagic, 1, 1, 28, 28, 784, {12});
    EXPECT_THROW(load_idx(p.images, p.labels), ArgumentError);
}

TEST(Idx, EmptyFileIsIoError) {
    TempDir tmp;
    const auto p = write_raw(tmp.path(), kIdxImageMagic, kIdxLabelMagic, 1, 1, 28, 28, 784, {0});
    std::ofstream(tmp.path() / "empty", std::ios::binary).flush();
    EXPECT_THROW(load_idx(tmp.path() / "empty", p.labels), IoError);
    EXPECT_THROW(load_idx(p.images, tmp.path() / "empty"), IoError);
}

// Four 2x2 images of bytes {0, 255}, written byte by byte.
TEST(Idx, HandBuiltFixture) {
    TempDir tmp;
    const unsigned char img[] = {0, 0, 8, 3, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 2,
                                 0, 255, 255, 0, 255, 255, 255, 255, 0, 0, 0, 0, 255, 0, 0, 255};
    const unsigned char lab[] = {0, 0, 8, 1, 0, 0, 0, 4, 1, 0, 9, 5};
    std::ofstream(tmp.path() / "i", std::ios::binary).write(reinterpret_cast<const char*>(img), sizeof img);
    std::ofstream(tmp.path() / "l", std::ios::binary).write(reinterpret_cast<const char*>(lab), sizeof lab);
    const auto d = load_idx(tmp.path() / "i", tmp.path() / "l");
    ASSERT_EQ(d.size(), 4);
    EXPECT_EQ(d.sample_shape(), (std::vector<std::int64_t>{1, 2, 2}));
    EXPECT_FLOAT_EQ(d.samples.sum().item<float>(), 8.0f);
    EXPECT_TRUE(((d.samples == 0) | (d.samples == 1)).all().item<bool>());
    EXPECT_FLOAT_EQ(d.samples[0][0][0][1].item<float>(), 1.0f);
    EXPECT_EQ(d.labels[2].item<std::int64_t>(), 9);
    // Labels file handed over as images.
    EXPECT_THROW(load_idx(tmp.path() / "l", tmp.path() / "l"), FormatError);
}

TEST(Validate, Invariants) {
    auto ok = make_dataset(torch::zeros({2, 1, 4, 4}), torch::tensor({0, 1}, torch::kInt64), 2);
    EXPECT_NO_THROW(validate(ok));
    EXPECT_THROW(make_dataset(torch::zeros({2, 1, 4, 4}), torch::tensor({0}, torch::kInt64), 2), ArgumentError);
    EXPECT_THROW(make_dataset(torch::full({1, 1, 2, 2}, 1.5), torch::tensor({0}, torch::kInt64), 2), ArgumentError);
    EXPECT_THROW(make_dataset(torch::zeros({1, 4}), torch::tensor({0}, torch::kInt64), 2), ArgumentError);
    EXPECT_THROW(make_dataset(torch::zeros({1, 1, 2, 2}), torch::tensor({0}, torch::kInt64), 1), ArgumentError);
    LabeledDataset empty = make_dataset(torch::zeros({0, 1, 2, 2}), torch::zeros({0}, torch::kInt64), 2);
    EXPECT_THROW(validate(empty), ArgumentError);
    EXPECT_NO_THROW(validate(empty, true));
}

TEST(Subsets, ClassSubsetAndCounts) {
    const auto d = make_synthetic_gaussian(3, 784, 5, 1);
    EXPECT_EQ(d.class_counts(), (std::vector<std::int64_t>{5, 5, 5}));
    const auto c1 = d.class_subset(1);
    EXPECT_EQ(c1.size(), 5);
    EXPECT_TRUE((c1.labels == 1).all().item<bool>());
    const auto s = d.subset(std::vector<std::int64_t>{14, 0});
    EXPECT_EQ(s.labels[0].item<std::int64_t>(), 2);
    EXPECT_TRUE(torch::equal(s.samples[1], d.samples[0]));
}

TEST(Split, DisjointAndDeterministic) {
    const auto a = split_indices(100, 20, 7);
    const auto b = split_indices(100, 20, 7);
    const auto c = split_indices(100, 20, 8);
    EXPECT_EQ(a.valid, b.valid);
    EXPECT_NE(a.valid, c.valid);
    ASSERT_EQ(a.valid.size(), 20u);
    ASSERT_EQ(a.train.size(), 80u);
    std::set<std::int64_t> all(a.train.begin(), a.train.end());
    all.insert(a.valid.begin(), a.valid.end());
    EXPECT_EQ(all.size(), 100u);
    EXPECT_THROW(split_indices(10, 10, 0), ArgumentError);
    EXPECT_THROW(split_indices(10, 0, 0), ArgumentError);
}

TEST(Split, FullMnistSizes) {
    const auto s = split_indices(60000, 5000, 0);
    EXPECT_EQ(s.train.size(), 55000u);
    EXPECT_EQ(s.valid.size(), 5000u);
    std::vector<char> seen(60000, 0);
    for (auto i : s.train) seen[static_cast<std::size_t>(i)]++;
    for (auto i : s.valid) seen[static_cast<std::size_t>(i)]++;
    EXPECT_EQ(std::count(seen.begin(), seen.end(), 1), 60000);
}

TEST(Split, DatasetKeepsClasses) {
    const auto d = make_synthetic_gaussian(3, 784, 20, 2);
    auto [train, valid] = split_dataset(d, 15, 4);
    EXPECT_EQ(train.size(), 45);
    EXPECT_EQ(valid.size(), 15);
    EXPECT_EQ(train.num_classes, 3);
    EXPECT_EQ(valid.num_classes, 3);
}

TEST(Synthetic, ShapesAndRange) {
    const auto d = make_synthetic_gaussian(4, 784, 10, 3);
    EXPECT_EQ(d.sample_shape(), (std::vector<std::int64_t>{1, 28, 28}));
    EXPECT_GE(d.samples.min().item<float>(), 0.0f);
    EXPECT_LE(d.samples.max().item<float>(), 1.0f);
    const auto v = make_synthetic_gaussian(4, 16, 10, 3);
    EXPECT_EQ(v.sample_shape(), (std::vector<std::int64_t>{1, 1, 16}));
    EXPECT_TRUE(torch::equal(make_synthetic_gaussian(4, 784, 10, 3).samples, d.samples));
}

TEST(Synthetic, PairSharesMeans) {
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.per_class = 40;
    auto [train, test] = make_synthetic_pair(spec, 20, 11);
    EXPECT_EQ(train.size(), 120);
    EXPECT_EQ(test.size(), 60);
    for (int k = 0; k < 3; ++k) {
        const auto mt = train.class_subset(k).samples.mean(0);
        const auto ms = test.class_subset(k).samples.mean(0);
        EXPECT_LT((mt - ms).abs().mean().item<float>(), 0.05f);
    }
    spec.num_classes = 1;
    EXPECT_THROW(make_synthetic_gaussian(spec, 0), ArgumentError);
}
