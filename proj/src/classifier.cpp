#include "fitcap/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "fitcap/errors.hpp"
#include "fitcap/log.hpp"
#include "fitcap/optim.hpp"
#include "fitcap/rng.hpp"
#include "fitcap/seeding.hpp"

namespace fitcap {

namespace {

constexpr std::int64_t kEvalChunk = 1000;
constexpr const char* kFormatTag = "fitcap-classifier";

}  // namespace

// --- config / log -------------------------------------------------------------

void ClassifierConfig::validate() const {
    (void)architecture();
    if (max_epochs < 1) throw ArgumentError("max_epochs must be >= 1");
    if (patience < 1 || patience > max_epochs) throw ArgumentError("patience must lie in [1, max_epochs]");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning_rate must be > 0");
    if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
}

nlohmann::json ClassifierConfig::to_json() const {
    return {{"dataset_id", dataset_id}, {"max_epochs", max_epochs}, {"patience", patience},
            {"learning_rate", learning_rate}, {"batch_size", batch_size}, {"seed", seed}};
}

ClassifierConfig ClassifierConfig::from_json(const nlohmann::json& j) {
    ClassifierConfig c;
    c.dataset_id = j.value("dataset_id", c.dataset_id);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    return c;
}

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::patience:
            return "patience";
        case StopReason::max_epochs:
            return "max_epochs";
        case StopReason::failure:
            return "failure";
    }
    return "unknown";
}

StopReason parse_stop_reason(const std::string& s) {
    if (s == "patience") return StopReason::patience;
    if (s == "max_epochs") return StopReason::max_epochs;
    if (s == "failure") return StopReason::failure;
    throw FormatError("unknown stop reason '" + s + "'");
}

std::vector<double> TrainingLog::valid_accuracy_trace() const {
    std::vector<double> out;
    out.reserve(epochs.size());
    for (const auto& e : epochs) out.push_back(e.valid_accuracy);
    return out;
}

nlohmann::json TrainingLog::to_json() const {
    auto ep = nlohmann::json::array();
    for (const auto& e : epochs) {
        nlohmann::json row;
        row["train_loss"] = std::isfinite(e.train_loss) ? nlohmann::json(e.train_loss) : nlohmann::json(nullptr);
        row["valid_accuracy"] = e.valid_accuracy;
        ep.push_back(row);
    }
    return {{"epochs", ep},
            {"stop_epoch", stop_epoch},
            {"selected_epoch", selected_epoch},
            {"best_valid_accuracy", best_valid_accuracy},
            {"stop_reason", to_string(stop_reason)},
            {"failed", failed},
            {"failure_reason", failure_reason}};
}

TrainingLog TrainingLog::from_json(const nlohmann::json& j) {
    TrainingLog log;
    for (const auto& e : j.at("epochs")) {
        EpochLog row;
        row.train_loss = e.at("train_loss").is_null() ? std::nan("") : e.at("train_loss").get<double>();
        row.valid_accuracy = e.at("valid_accuracy").get<double>();
        log.epochs.push_back(row);
    }
    log.stop_epoch = j.at("stop_epoch").get<int>();
    log.selected_epoch = j.at("selected_epoch").get<int>();
    log.best_valid_accuracy = j.at("best_valid_accuracy").get<double>();
    log.stop_reason = parse_stop_reason(j.at("stop_reason").get<std::string>());
    log.failed = j.value("failed", false);
    log.failure_reason = j.value("failure_reason", std::string{});
    return log;
}

// --- early stopping -----------------------------------------------------------

EarlyStopping::EarlyStopping(int max_epochs, int patience) : max_epochs_(max_epochs), patience_(patience) {
    if (max_epochs < 1 || patience < 1) throw ArgumentError("max_epochs and patience must be >= 1");
}

bool EarlyStopping::update(double valid_accuracy) {
    ++epoch_;
    if (valid_accuracy > best_) {
        best_ = valid_accuracy;
        best_epoch_ = epoch_;
        return true;
    }
    return false;
}

bool EarlyStopping::should_stop() const { return epoch_ >= max_epochs_ || epoch_ - best_epoch_ >= patience_; }

StopReason EarlyStopping::reason() const {
    return epoch_ - best_epoch_ >= patience_ ? StopReason::patience : StopReason::max_epochs;
}

TrainingLog run_early_stopping(const ClassifierConfig& cfg, const std::function<double()>& train_epoch,
                               const std::function<double()>& evaluate, const std::function<void()>& on_best) {
    EarlyStopping stopper(cfg.max_epochs, cfg.patience);
    TrainingLog log;
    while (!stopper.should_stop()) {
        const double loss = train_epoch();
        if (!std::isfinite(loss)) {
            log.failed = true;
            log.failure_reason = "non-finite training loss at epoch " + std::to_string(stopper.epochs_seen() + 1);
            log.stop_reason = StopReason::failure;
            break;
        }
        const double acc = evaluate();
        log.epochs.push_back({loss, acc});
        if (stopper.update(acc) && on_best) on_best();
        log.stop_reason = stopper.reason();
    }
    log.stop_epoch = stopper.epochs_seen();
    log.selected_epoch = stopper.best_epoch();
    log.best_valid_accuracy = stopper.best_epoch() > 0 ? stopper.best_value() : 0.0;
    return log;
}

// --- trained classifier -------------------------------------------------------

TrainedClassifier::TrainedClassifier(nets::ArchitectureId arch, int num_classes, std::uint64_t init_seed)
    : arch_(arch), num_classes_(num_classes), net_(arch, num_classes) {
    if (num_classes < 2) throw ArgumentError("classifier needs K >= 2");
    auto gen = make_torch_generator(init_seed);
    nets::init_default(*net_, gen);
    net_->eval();
}

void TrainedClassifier::check_input(const torch::Tensor& x) const {
    if (x.dim() != 4 || x.size(1) != 1 || x.size(2) != nets::kImageSide || x.size(3) != nets::kImageSide) {
        throw ArgumentError("classifier expects (N, 1, 28, 28) inputs");
    }
}

torch::Tensor TrainedClassifier::log_probs(const torch::Tensor& x) const {
    check_input(x);
    torch::NoGradGuard guard;
    std::vector<torch::Tensor> parts;
    for (std::int64_t start = 0; start < x.size(0); start += kEvalChunk) {
        parts.push_back(net_->forward(x.narrow(0, start, std::min(kEvalChunk, x.size(0) - start))));
    }
    if (parts.empty()) return torch::empty({0, num_classes_});
    return torch::cat(parts, 0);
}

torch::Tensor TrainedClassifier::predict(const torch::Tensor& x) const { return log_probs(x).argmax(1); }

torch::Tensor TrainedClassifier::features(const torch::Tensor& x) const {
    check_input(x);
    torch::NoGradGuard guard;
    std::vector<torch::Tensor> parts;
    for (std::int64_t start = 0; start < x.size(0); start += kEvalChunk) {
        parts.push_back(net_->features(x.narrow(0, start, std::min(kEvalChunk, x.size(0) - start))));
    }
    if (parts.empty()) return torch::empty({0, feature_dim()});
    return torch::cat(parts, 0);
}

// --- training -----------------------------------------------------------------

ClassifierResult train_classifier(MixtureSampler& batches, const LabeledDataset& valid, const ClassifierConfig& cfg) {
    cfg.validate();
    validate(valid);
    if (batches.config().batch_size != cfg.batch_size) {
        throw ArgumentError("mixture stream batch size differs from classifier batch size");
    }
    if (batches.num_classes() != valid.num_classes) throw ArgumentError("stream and validation disagree on K");

    TrainedClassifier clf(cfg.architecture(), valid.num_classes, derive_seed(cfg.seed, "classifier/init"));
    auto& net = clf.network();
    FusedAdam opt(net->parameters(), cfg.learning_rate);
    auto dropout_gen = make_torch_generator(derive_seed(cfg.seed, "classifier/dropout"));
    const std::int64_t epoch_len = (batches.train_size() + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<torch::Tensor> best_state = nets::snapshot(*net);

    auto train_epoch = [&]() -> double {
        net->train();
        double sum = 0.0;
        for (std::int64_t b = 0; b < epoch_len; ++b) {
            auto batch = batches.next_batch();
            auto loss = torch::nll_loss(net->forward(batch.samples, &dropout_gen), batch.labels);
            const double v = loss.item<double>();
            if (!std::isfinite(v)) return v;
            opt.zero_grad();
            loss.backward();
            opt.step();
            sum += v;
        }
        return sum / static_cast<double>(epoch_len);
    };
    auto evaluate = [&]() {
        net->eval();
        return evaluate_accuracy(clf, valid);
    };
    auto on_best = [&]() { best_state = nets::snapshot(*net); };

    auto log = run_early_stopping(cfg, train_epoch, evaluate, on_best);
    nets::restore(*net, best_state);
    net->eval();
    clf.set_selection(log.selected_epoch, log.valid_accuracy_trace());
    log::info("classifier seed ", cfg.seed, ": ", log.stop_epoch, " epochs (", to_string(log.stop_reason),
              "), best valid ", log.best_valid_accuracy, " at epoch ", log.selected_epoch);
    return ClassifierResult{std::move(clf), std::move(log)};
}

// --- evaluation ---------------------------------------------------------------

double evaluate_accuracy(const TrainedClassifier& clf, const LabeledDataset& data) {
    validate(data);
    if (data.num_classes != clf.num_classes()) throw ArgumentError("dataset and classifier disagree on K");
    auto pred = clf.predict(data.samples);
    const auto correct = (pred == data.labels).sum().item<std::int64_t>();
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<std::optional<double>> evaluate_per_class(const TrainedClassifier& clf, const LabeledDataset& data) {
    validate(data);
    if (data.num_classes != clf.num_classes()) throw ArgumentError("dataset and classifier disagree on K");
    auto pred = clf.predict(data.samples);
    auto hit = (pred == data.labels).to(torch::kInt64);
    std::vector<std::optional<double>> out(static_cast<std::size_t>(data.num_classes));
    for (int k = 0; k < data.num_classes; ++k) {
        auto mask = data.labels == k;
        const auto total = mask.sum().item<std::int64_t>();
        if (total == 0) continue;
        const auto correct = hit.masked_select(mask).sum().item<std::int64_t>();
        out[static_cast<std::size_t>(k)] = static_cast<double>(correct) / static_cast<double>(total);
    }
    return out;
}

LabeledDataset stride_subsample(const LabeledDataset& data, std::int64_t cap) {
    if (cap < 1) throw ArgumentError("subsample cap must be >= 1");
    const auto n = data.size();
    if (n <= cap) return data;
    std::vector<std::int64_t> idx(static_cast<std::size_t>(cap));
    for (std::int64_t i = 0; i < cap; ++i) idx[static_cast<std::size_t>(i)] = i * n / cap;
    return data.subset(idx);
}

double knn_accuracy(const LabeledDataset& train_in, const LabeledDataset& test_in, int k, std::int64_t cap) {
    validate(train_in);
    validate(test_in);
    if (k < 1) throw ArgumentError("k must be >= 1");
    if (train_in.sample_numel() != test_in.sample_numel()) throw ArgumentError("train/test sample shapes differ");
    const auto train = stride_subsample(train_in, cap);
    const auto test = stride_subsample(test_in, cap);

    auto a = train.samples.reshape({train.size(), -1}).to(torch::kFloat64);
    auto a_norm = a.pow(2).sum(1);
    auto train_labels = train.labels.contiguous();
    const auto* tl = train_labels.data_ptr<std::int64_t>();
    const auto kk = std::min<std::int64_t>(k, train.size());

    std::int64_t correct = 0;
    for (std::int64_t start = 0; start < test.size(); start += kEvalChunk) {
        const auto len = std::min(kEvalChunk, test.size() - start);
        auto b = test.samples.narrow(0, start, len).reshape({len, -1}).to(torch::kFloat64);
        auto truth = test.labels.narrow(0, start, len).contiguous();
        // Squared distances; the |b|^2 term is constant per row and dropped.
        auto dist = (a_norm.unsqueeze(0) - 2.0 * torch::mm(b, a.t())).contiguous();
        if (kk == 1) {
            auto nn = dist.argmin(1);  // first minimum -> lowest train index
            correct += (train_labels.index_select(0, nn) == truth).sum().item<std::int64_t>();
            continue;
        }
        const auto* d = dist.data_ptr<double>();
        const auto* t = truth.data_ptr<std::int64_t>();
        std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
        for (std::int64_t r = 0; r < len; ++r) {
            const double* row = d + r * train.size();
            std::iota(order.begin(), order.end(), std::int64_t{0});
            std::partial_sort(order.begin(), order.begin() + kk, order.end(), [row](std::int64_t x, std::int64_t y) {
                return row[x] < row[y] || (row[x] == row[y] && x < y);
            });
            std::map<std::int64_t, int> votes;
            for (std::int64_t j = 0; j < kk; ++j) ++votes[tl[order[static_cast<std::size_t>(j)]]];
            int top = 0;
            for (const auto& [label, v] : votes) top = std::max(top, v);
            std::int64_t winner = -1;
            for (std::int64_t j = 0; j < kk && winner < 0; ++j) {
                const auto label = tl[order[static_cast<std::size_t>(j)]];
                if (votes[label] == top) winner = label;
            }
            if (winner == t[r]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

// --- checkpoints --------------------------------------------------------------

std::string classifier_checkpoint_name(const std::string& dataset, const std::string& model, std::uint64_t seed,
                                       double tau) {
    std::ostringstream os;
    os << dataset << "_clf_" << model << "_" << seed << "_tau" << std::fixed << std::setprecision(3) << tau << ".ckpt";
    return os.str();
}

void save_classifier(const TrainedClassifier& clf, const ClassifierConfig& cfg, const std::filesystem::path& path) {
    nlohmann::json meta = {{"format", kFormatTag},
                           {"version", 1},
                           {"architecture_id", nets::to_string(clf.architecture())},
                           {"num_classes", clf.num_classes()},
                           {"selected_epoch", clf.selected_epoch()},
                           {"valid_accuracy_trace", clf.valid_accuracy_trace()},
                           {"config", cfg.to_json()}};
    torch::serialize::OutputArchive ar;
    ar.write("meta", c10::IValue(meta.dump()));
    torch::serialize::OutputArchive weights;
    const_cast<TrainedClassifier&>(clf).network()->save(weights);
    ar.write("classifier", weights);
    auto tmp = path;
    tmp += ".tmp";
    ar.save_to(tmp.string());
    std::filesystem::rename(tmp, path);
}

TrainedClassifier load_classifier(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("missing checkpoint " + path.string());
    torch::serialize::InputArchive ar;
    ar.load_from(path.string());
    c10::IValue meta_value;
    if (!ar.try_read("meta", meta_value) || !meta_value.isString()) {
        throw FormatError(path.string() + ": not a classifier checkpoint");
    }
    const auto meta = nlohmann::json::parse(meta_value.toStringRef());
    if (meta.value("format", "") != kFormatTag) throw FormatError(path.string() + ": wrong checkpoint format tag");
    TrainedClassifier clf(nets::parse_architecture(meta.at("architecture_id").get<std::string>()),
                          meta.at("num_classes").get<int>(), 0);
    torch::serialize::InputArchive weights;
    ar.read("classifier", weights);
    clf.network()->load(weights);
    clf.network()->eval();
    clf.set_selection(meta.at("selected_epoch").get<int>(), meta.at("valid_accuracy_trace").get<std::vector<double>>());
    return clf;
}

}  // namespace fitcap
