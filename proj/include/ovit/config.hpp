#pragma once

// JSON run configuration. Every key has a documented default; a config file
// only lists what it changes, and `--set a.b=value` overrides apply last.
// Unknown keys and wrongly typed values are rejected with ConfigError.
//
//   {
//     "lr": 0.005, "momentum": 0.9, "weight_decay": 0.0007,
//     "epochs": 100, "batch_size": 32, "seed": 0,
//     "optimizer": "euclidean-sgd", "penalty_lambda": 0.1, "augment": true,
//     "model": {"depth": 2, "heads": 4, "hidden": 64, "mlp": 128, "patch": 4,
//               "classes": 2, "image_side": 16, "channels": 1, "mode": "cayley"},
//     "data":  {"source": "synthetic", "train_per_class": 100,
//               "test_per_class": 50, "noise_std": 0.1, "seed": 1,
//               "train_images": "", "train_labels": "",
//               "test_images": "", "test_labels": ""}
//   }

#include <filesystem>
#include <span>
#include <string>
#include <utility>

#include "json.hpp"

#include "ovit/data.hpp"
#include "ovit/model.hpp"
#include "ovit/training.hpp"

namespace ovit {

struct DataConfig {
    // "synthetic" (stripes) or "idx" (four IDX files).
    std::string source = "synthetic";
    std::size_t train_per_class = 100;
    std::size_t test_per_class = 50;
    double noise_std = 0.1;
    std::uint64_t seed = 1;
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
};

struct RunConfig {
    TrainConfig train;
    DataConfig data;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

// Defaults, then `document`, then each "dotted.key=value" override.
RunConfig resolve_config(const nlohmann::json& document, std::span<const std::string> overrides);
// Reads `path` (missing file: ConfigError naming the path); empty path means {}.
RunConfig parse_config(const std::filesystem::path& path, std::span<const std::string> overrides);

// Train and test sets described by config.data, shaped for config.train.model.
std::pair<Dataset, Dataset> load_datasets(const RunConfig& config);

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

} // namespace ovit
