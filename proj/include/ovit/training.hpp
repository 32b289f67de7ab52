#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "ovit/data.hpp"
#include "ovit/matrix.hpp"
#include "ovit/model.hpp"
#include "ovit/orthogonal.hpp"

namespace ovit {

enum class OptimizerKind { euclidean_sgd, riemannian_sgd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
    ModelConfig model;
    // Default SGD hyperparameters.
    double lr = 5.0e-3;
    double momentum = 0.9;
    double weight_decay = 7.0e-4;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::euclidean_sgd;
    double penalty_lambda = 0.1;
    bool augment = true;

    // Throws ConfigError naming the offending field. train() alone accepts
    // lr = 0, which freezes the weights.
    void validate(bool allow_zero_lr = false) const;
};

struct MetricsRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double max_orthogonality_error = 0.0;
    double wall_time_s = 0.0;
};

// Mean over rows of -log softmax(logits)[label].
double cross_entropy(const Matrix& logits, std::span<const int> labels);

struct SgdState {
    Matrix velocity;
};

// v <- momentum v + grad + weight_decay param; param <- param - lr v.
void sgd_step(Matrix& param, const Matrix& grad, SgdState& state, const TrainConfig& config);

// retract(w, -tangent_project(w, grad), lr)
OrthogonalMatrix riemannian_sgd_step(const OrthogonalMatrix& w, const Matrix& grad, double lr);

// Seeded Gaussian noise N(0, std^2) per pixel, clamped to [0, 1].
std::vector<Image> add_gaussian_noise(std::span<const Image> images, double std_dev,
                                      std::uint64_t seed);

// Top-1 accuracy of the frozen model, on noisy copies when noise_std > 0.
double evaluate(const Model& model, const Dataset& dataset, double noise_std = 0.0,
                std::uint64_t seed = 0);

std::vector<int> predict(const Model& model, std::span<const Image> images);

struct TrainResult {
    std::vector<MetricsRecord> metrics;
    Model model;
};

using EpochCallback = std::function<void(const MetricsRecord&)>;

// Model initialized from config.seed; riemannian-sgd starts the attention
// weights on the manifold (cayley of the skew part of the random draw).
Model initial_model(const TrainConfig& config);

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set,
                  const EpochCallback& on_epoch = {});

inline constexpr std::string_view kMetricsCsvHeader =
    "epoch,train_loss,train_acc,test_acc,max_orth_err,wall_time_s";

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> metrics);
void write_metrics_row(std::ostream& out, const MetricsRecord& record);

} // namespace ovit
