#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "fitcap/classifier.hpp"
#include "fitcap/errors.hpp"
#include "test_util.hpp"

using namespace fitcap;
using fitcap::testing::TempDir;

namespace {

ClassifierConfig stopping(int max_epochs, int patience) {
    ClassifierConfig c;
    c.max_epochs = max_epochs;
    c.patience = patience;
    return c;
}

TrainingLog drive(const ClassifierConfig& cfg, const std::vector<double>& trace) {
    std::size_t epoch = 0;
    return run_early_stopping(
        cfg, [&] { return 0.1; },
        [&] {
            const double v = trace[std::min(epoch, trace.size() - 1)];
            ++epoch;
            return v;
        },
        {});
}

LabeledDataset points(std::vector<float> xs, std::vector<std::int64_t> ys, int k = 2) {
    const auto n = static_cast<std::int64_t>(xs.size());
    return make_dataset(torch::tensor(xs).view({n, 1, 1, 1}), torch::tensor(ys, torch::kInt64), k);
}

}  // namespace

TEST(EarlyStopping, FlatAfterTenStopsAtSixty) {
    std::vector<double> trace;
    for (int e = 1; e <= 10; ++e) trace.push_back(0.5 + 0.04 * e);
    trace.push_back(0.9);
    const auto log = drive(stopping(200, 50), trace);
    EXPECT_EQ(log.stop_epoch, 60);
    EXPECT_EQ(log.selected_epoch, 10);
    EXPECT_EQ(log.stop_reason, StopReason::patience);
    EXPECT_EQ(log.epochs.size(), 60u);
}

TEST(EarlyStopping, StrictlyImprovingRunsToMax) {
    std::vector<double> trace;
    for (int e = 1; e <= 200; ++e) trace.push_back(e / 1000.0);
    const auto log = drive(stopping(200, 50), trace);
    EXPECT_EQ(log.stop_epoch, 200);
    EXPECT_EQ(log.selected_epoch, 200);
    EXPECT_EQ(log.stop_reason, StopReason::max_epochs);
}

TEST(EarlyStopping, TiesKeepEarliest) {
    const auto log = drive(stopping(10, 3), {0.5, 0.7, 0.7, 0.7, 0.7});
    EXPECT_EQ(log.selected_epoch, 2);
    EXPECT_EQ(log.stop_epoch, 5);
    EXPECT_DOUBLE_EQ(log.best_valid_accuracy, 0.7);
}

TEST(EarlyStopping, NonFiniteLossFails) {
    int epoch = 0;
    const auto log = run_early_stopping(
        stopping(10, 3), [&] { return ++epoch == 3 ? std::numeric_limits<double>::quiet_NaN() : 1.0; },
        [] { return 0.5; }, {});
    EXPECT_TRUE(log.failed);
    EXPECT_EQ(log.stop_reason, StopReason::failure);
    EXPECT_EQ(log.stop_epoch, 2);
}

TEST(EarlyStopping, RejectsBadBudget) { EXPECT_THROW(EarlyStopping(0, 5), ArgumentError); }

TEST(TrainingLog, JsonRoundTrip) {
    const auto log = drive(stopping(10, 2), {0.1, 0.3, 0.2});
    const auto back = TrainingLog::from_json(log.to_json());
    EXPECT_EQ(back.to_json(), log.to_json());
    EXPECT_EQ(back.valid_accuracy_trace(), log.valid_accuracy_trace());
    EXPECT_EQ(parse_stop_reason(to_string(StopReason::patience)), StopReason::patience);
}

TEST(ClassifierConfig, ValidationAndJson) {
    ClassifierConfig c;
    EXPECT_EQ(c.max_epochs, 200);
    EXPECT_EQ(c.patience, 50);
    EXPECT_DOUBLE_EQ(c.learning_rate, 1e-3);
    EXPECT_EQ(c.batch_size, 64);
    EXPECT_EQ(ClassifierConfig::from_json(c.to_json()).to_json(), c.to_json());
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ArgumentError);
    c = ClassifierConfig{};
    c.dataset_id = "cifar";
    EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Knn, HandDistances) {
    const auto train = points({0.0f, 1.0f}, {0, 1});
    EXPECT_DOUBLE_EQ(knn_accuracy(train, points({0.4f}, {0})), 1.0);
    EXPECT_DOUBLE_EQ(knn_accuracy(train, points({0.6f}, {0})), 0.0);
    EXPECT_DOUBLE_EQ(knn_accuracy(train, points({1.0f, 0.0f}, {1, 0})), 1.0);
}

TEST(Knn, MajorityVote) {
    const auto train = points({0.0f, 0.1f, 0.2f, 0.9f}, {0, 1, 1, 0});
    EXPECT_DOUBLE_EQ(knn_accuracy(train, points({0.05f}, {1}), 3), 1.0);
    EXPECT_THROW(knn_accuracy(train, points({0.05f}, {1}), 0), ArgumentError);
}

TEST(Knn, SeparatedClustersAndRepeatability) {
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.per_class = 60;
    auto [train, test] = make_synthetic_pair(spec, 30, 4);
    const double a = knn_accuracy(train, test);
    EXPECT_GT(a, 0.95);
    EXPECT_EQ(a, knn_accuracy(train, test));
    EXPECT_EQ(a, knn_accuracy(train, test));
}

TEST(Knn, StrideSubsample) {
    const auto d = make_synthetic_gaussian(2, 4, 10, 1);
    const auto s = stride_subsample(d, 5);
    EXPECT_EQ(s.size(), 5);
    EXPECT_TRUE(torch::equal(s.samples[1], d.samples[4]));
    EXPECT_EQ(stride_subsample(d, 100).size(), 20);
}

TEST(Classifier, UntrainedIsNearChance) {
    const auto d = make_synthetic_gaussian(10, 784, 100, 8);
    TrainedClassifier clf(nets::ArchitectureId::mnist, 10, 123);
    const double acc = evaluate_accuracy(clf, d);
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 0.35);
}

TEST(Classifier, TrainsOnSyntheticAndRoundTrips) {
    TempDir tmp;
    SyntheticSpec spec;
    spec.num_classes = 4;
    spec.per_class = 60;
    auto [train, test] = make_synthetic_pair(spec, 20, 3);
    auto [tr, valid] = split_dataset(train, 40, 1);
    ClassifierConfig cfg;
    cfg.dataset_id = "synthetic";
    cfg.max_epochs = 6;
    cfg.patience = 3;
    cfg.batch_size = 16;
    cfg.seed = 11;
    MixtureSampler s(tr, std::make_shared<NoiseGenerator>(4), MixtureConfig{0.0, 16, 2});
    auto result = train_classifier(s, valid, cfg);
    EXPECT_GE(result.log.stop_epoch, 1);
    EXPECT_EQ(result.classifier.selected_epoch(), result.log.selected_epoch);
    const double acc = evaluate_accuracy(result.classifier, test);
    EXPECT_GT(acc, 0.9);

    const auto per = evaluate_per_class(result.classifier, test);
    ASSERT_EQ(per.size(), 4u);
    double mean = 0.0;
    for (const auto& p : per) mean += p.value();
    EXPECT_NEAR(mean / 4.0, acc, 1e-12);

    const auto path = tmp.path() / classifier_checkpoint_name("synthetic", "BASELINE", 0, 0.0);
    save_classifier(result.classifier, cfg, path);
    const auto back = load_classifier(path);
    EXPECT_EQ(back.selected_epoch(), result.classifier.selected_epoch());
    EXPECT_EQ(back.valid_accuracy_trace(), result.classifier.valid_accuracy_trace());
    EXPECT_TRUE(torch::equal(back.log_probs(test.samples), result.classifier.log_probs(test.samples)));

    // Same config and seeds reproduce the run.
    MixtureSampler s2(tr, std::make_shared<NoiseGenerator>(4), MixtureConfig{0.0, 16, 2});
    auto again = train_classifier(s2, valid, cfg);
    EXPECT_EQ(evaluate_accuracy(again.classifier, test), acc);
}

TEST(Classifier, PerClassOfConstantPredictor) {
    // Untrained network driven to always answer class 0 by its last bias.
    TrainedClassifier clf(nets::ArchitectureId::mnist, 3, 1);
    {
        torch::NoGradGuard ng;
        auto& net = clf.network();
        net->fc2->weight.zero_();
        net->fc2->bias.copy_(torch::tensor({5.0f, 0.0f, 0.0f}));
    }
    const auto d = make_synthetic_gaussian(3, 784, 10, 2);
    const auto per = evaluate_per_class(clf, d);
    EXPECT_DOUBLE_EQ(*per[0], 1.0);
    EXPECT_DOUBLE_EQ(*per[1], 0.0);
    EXPECT_DOUBLE_EQ(*per[2], 0.0);
    const auto only0 = d.class_subset(0);
    const auto absent = evaluate_per_class(clf, only0);
    EXPECT_FALSE(absent[1].has_value());
    EXPECT_DOUBLE_EQ(evaluate_accuracy(clf, d.class_subset(1)), 0.0);
    EXPECT_DOUBLE_EQ(evaluate_accuracy(clf, d.subset(std::vector<std::int64_t>{0})), 1.0);
}

TEST(Classifier, RejectsWrongInputShape) {
    TrainedClassifier clf(nets::ArchitectureId::mnist, 10, 1);
    EXPECT_THROW(clf.log_probs(torch::rand({2, 1, 14, 14})), ArgumentError);
}

TEST(Classifier, CheckpointName) {
    EXPECT_EQ(classifier_checkpoint_name("mnist", "VAE", 2, 0.5), "mnist_clf_VAE_2_tau0.500.ckpt");
}
