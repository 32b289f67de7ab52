#include "ovit/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "ovit/autodiff.hpp"
#include "ovit/errors.hpp"

namespace ovit {

namespace {

// Stream offsets for seed splitting.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kAugmentStream = 0x4155474dULL;

std::size_t argmax_row(const Matrix& m, std::size_t r) {
    auto row = m.row(r);
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

void check_dataset(const ModelConfig& c, const Dataset& ds, const char* which) {
    ds.validate();
    if (ds.side != c.image_side || ds.channels != c.channels)
        throw ConfigError(fmt::format("{} set images are {}x{}x{}, model.image_side/channels want "
                                      "{}x{}x{}",
                                      which, ds.side, ds.side, ds.channels, c.image_side,
                                      c.image_side, c.channels));
    if (ds.classes > c.classes)
        throw ConfigError(fmt::format("{} set has {} classes, model.classes is {}", which,
                                      ds.classes, c.classes));
}

} // namespace

std::string_view to_string(OptimizerKind kind) {
    return kind == OptimizerKind::euclidean_sgd ? "euclidean-sgd" : "riemannian-sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "euclidean-sgd") return OptimizerKind::euclidean_sgd;
    if (name == "riemannian-sgd") return OptimizerKind::riemannian_sgd;
    throw ConfigError(fmt::format(
        "optimizer: unknown optimizer '{}' (expected euclidean-sgd or riemannian-sgd)", name));
}

void TrainConfig::validate(bool allow_zero_lr) const {
    model.validate();
    if (!(lr > 0.0 || (allow_zero_lr && lr == 0.0)))
        throw ConfigError(fmt::format("lr must be > 0, got {}", lr));
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw ConfigError(fmt::format("momentum must be in [0, 1), got {}", momentum));
    if (!(weight_decay >= 0.0))
        throw ConfigError(fmt::format("weight_decay must be >= 0, got {}", weight_decay));
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(penalty_lambda >= 0.0))
        throw ConfigError(fmt::format("penalty_lambda must be >= 0, got {}", penalty_lambda));
    if (optimizer == OptimizerKind::riemannian_sgd && model.mode != ParamMode::plain)
        throw ConfigError(fmt::format(
            "optimizer: riemannian-sgd updates effective weights directly and needs "
            "model.mode=plain, got {}",
            to_string(model.mode)));
}

double cross_entropy(const Matrix& logits, std::span<const int> labels) {
    ad::Tape tape;
    return ad::cross_entropy(tape.constant(logits), labels).value().item();
}

void sgd_step(Matrix& param, const Matrix& grad, SgdState& state, const TrainConfig& config) {
    require_same_shape(param, grad, "sgd_step");
    if (state.velocity.empty()) state.velocity = Matrix::zeros(param.rows(), param.cols());
    require_same_shape(param, state.velocity, "sgd_step");
    auto v = state.velocity.data();
    auto p = param.data();
    auto g = grad.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = config.momentum * v[i] + g[i] + config.weight_decay * p[i];
        p[i] -= config.lr * v[i];
    }
}

OrthogonalMatrix riemannian_sgd_step(const OrthogonalMatrix& w, const Matrix& grad, double lr) {
    const Matrix direction = scale(tangent_project(w, grad), -1.0);
    return retract(w, direction, lr);
}

std::vector<Image> add_gaussian_noise(std::span<const Image> images, double std_dev,
                                      std::uint64_t seed) {
    if (!(std_dev >= 0.0))
        throw ArgumentError(fmt::format("add_gaussian_noise: std must be >= 0, got {}", std_dev));
    std::vector<Image> out(images.begin(), images.end());
    if (std_dev == 0.0) return out;
    Rng rng(seed);
    for (Image& im : out)
        for (double& p : im.pixels) p = std::clamp(p + std_dev * rng.normal(), 0.0, 1.0);
    return out;
}

std::vector<int> predict(const Model& model, std::span<const Image> images) {
    std::vector<int> out;
    out.reserve(images.size());
    constexpr std::size_t chunk = 64;
    for (std::size_t start = 0; start < images.size(); start += chunk) {
        const std::size_t n = std::min(chunk, images.size() - start);
        const Matrix logits = forward(model, images.subspan(start, n));
        for (std::size_t r = 0; r < n; ++r) out.push_back(static_cast<int>(argmax_row(logits, r)));
    }
    return out;
}

double evaluate(const Model& model, const Dataset& dataset, double noise_std, std::uint64_t seed) {
    if (!(noise_std >= 0.0))
        throw ArgumentError(fmt::format("evaluate: noise std must be >= 0, got {}", noise_std));
    if (dataset.size() == 0) return 0.0;
    const std::vector<Image> images =
        noise_std > 0.0 ? add_gaussian_noise(dataset.images, noise_std, seed) : dataset.images;
    const std::vector<int> pred = predict(model, images);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == dataset.labels[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

Model initial_model(const TrainConfig& config) {
    Model model = Model::initialize(config.model, Rng(config.seed).split(kInitStream).next_u64());
    if (config.optimizer == OptimizerKind::riemannian_sgd)
        for (std::size_t idx : model.attention_indices())
            model[idx] = cayley(skew_symmetrize(model[idx])).matrix();
    return model;
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set,
                  const EpochCallback& on_epoch) {
    config.validate(/*allow_zero_lr=*/true);
    check_dataset(config.model, train_set, "train");
    check_dataset(config.model, test_set, "test");

    TrainResult result{{}, initial_model(config)};
    Model& model = result.model;
    const bool riemannian = config.optimizer == OptimizerKind::riemannian_sgd;
    const bool penalized = config.model.mode == ParamMode::penalty && config.penalty_lambda > 0.0;

    std::vector<bool> on_manifold(model.parameters().size(), false);
    if (riemannian)
        for (std::size_t idx : model.attention_indices()) on_manifold[idx] = true;

    std::vector<SgdState> states(model.parameters().size());
    const Rng root(config.seed);
    Rng shuffle_rng = root.split(kShuffleStream);
    Rng augment_rng = root.split(kAugmentStream);

    std::vector<std::size_t> order(train_set.size());
    const auto start = std::chrono::steady_clock::now();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            std::vector<Image> batch;
            std::vector<int> labels;
            for (std::size_t i = begin; i < end; ++i) {
                const Image& im = train_set.images[order[i]];
                batch.push_back(config.augment ? augment(im, augment_rng) : im);
                labels.push_back(train_set.labels[order[i]]);
            }

            ad::Tape tape;
            BoundModel bound(tape, model);
            const ad::Var data_loss = ad::cross_entropy(bound.forward(batch), labels);
            const ad::Var objective =
                penalized ? ad::add(data_loss, ad::scale(bound.orthogonality_penalty(),
                                                         config.penalty_lambda))
                          : data_loss;
            const ad::Gradients grads = tape.backward(objective);
            loss_sum += data_loss.value().item() * static_cast<double>(end - begin);

            for (std::size_t i = 0; i < model.parameters().size(); ++i) {
                const Matrix& g = grads[bound.leaf(i)];
                if (on_manifold[i])
                    model[i] = riemannian_sgd_step(OrthogonalMatrix::unchecked(model[i]), g,
                                                   config.lr)
                                   .matrix();
                else
                    sgd_step(model[i], g, states[i], config);
            }
        }

        MetricsRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_set.size() ? loss_sum / static_cast<double>(train_set.size()) : 0.0;
        rec.train_accuracy = evaluate(model, train_set);
        rec.test_accuracy = evaluate(model, test_set);
        rec.max_orthogonality_error = max_orthogonality_error(model);
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.metrics.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

void write_metrics_row(std::ostream& out, const MetricsRecord& r) {
    // fmt formatting is locale-independent: '.' decimal separator always.
    fmt::print(out, "{},{:.17g},{:.17g},{:.17g},{:.17g},{:.6f}\n", r.epoch, r.train_loss,
               r.train_accuracy, r.test_accuracy, r.max_orthogonality_error, r.wall_time_s);
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> metrics) {
    out << kMetricsCsvHeader << '\n';
    for (const MetricsRecord& r : metrics) write_metrics_row(out, r);
}

} // namespace ovit
