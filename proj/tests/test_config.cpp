#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ovit/config.hpp"
#include "ovit/errors.hpp"

using namespace ovit;
using nlohmann::json;

namespace {

RunConfig resolve(const json& doc, std::vector<std::string> overrides = {}) {
    return resolve_config(doc, overrides);
}

std::string error_of(const json& doc, std::vector<std::string> overrides = {}) {
    try {
        resolve(doc, overrides);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Config, EmptyObjectGivesDefaults) {
    const RunConfig rc = resolve(json::object());
    const TrainConfig d;
    EXPECT_EQ(rc.train.lr, d.lr);
    EXPECT_EQ(rc.train.epochs, d.epochs);
    EXPECT_EQ(rc.train.model, ModelConfig{});
    EXPECT_EQ(rc.data.source, "synthetic");
}

TEST(Config, ReferenceHyperparameters) {
    const RunConfig rc = resolve(json{{"lr", 5e-3}, {"momentum", 0.9}, {"weight_decay", 7e-4}});
    EXPECT_EQ(rc.train.lr, 5e-3);
    EXPECT_EQ(rc.train.momentum, 0.9);
    EXPECT_EQ(rc.train.weight_decay, 7e-4);
}

TEST(Config, DottedOverridesApplyLast) {
    const RunConfig rc = resolve(json{{"model", {{"heads", 4}}}},
                                 {"model.heads=2", "model.mode=exp", "augment=false", "data.noise_std=0.05"});
    EXPECT_EQ(rc.train.model.heads, 2u);
    EXPECT_EQ(rc.train.model.mode, ParamMode::exp);
    EXPECT_FALSE(rc.train.augment);
    EXPECT_EQ(rc.data.noise_std, 0.05);
}

TEST(Config, ErrorsNameTheKey) {
    EXPECT_NE(error_of(json::object(), {"model.heads=3"}).find("model.heads"), std::string::npos);
    EXPECT_NE(error_of(json{{"bogus", 1}}).find("bogus"), std::string::npos);
    EXPECT_NE(error_of(json{{"model", {{"widht", 1}}}}).find("model.widht"), std::string::npos);
    EXPECT_NE(error_of(json::object(), {"model.nope=1"}).find("model.nope"), std::string::npos);
    EXPECT_NE(error_of(json{{"lr", "fast"}}).find("lr"), std::string::npos);
    EXPECT_NE(error_of(json{{"epochs", -1}}).find("epochs"), std::string::npos);
    EXPECT_NE(error_of(json{{"lr", -0.1}}).find("lr"), std::string::npos);
    EXPECT_NE(error_of(json::object(), {"noequals"}).find("noequals"), std::string::npos);
    EXPECT_NE(error_of(json::object(), {"model=1"}).find("model"), std::string::npos);
    EXPECT_FALSE(error_of(json::array()).empty());
}

TEST(Config, MissingFileNamesThePath) {
    try {
        parse_config("/nonexistent/run.json", {});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/run.json"), std::string::npos);
    }
}

TEST(Config, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "ovit_config_test.json";
    RunConfig rc;
    rc.train.epochs = 7;
    rc.train.model.mode = ParamMode::penalty;
    std::ofstream(path) << to_json(rc).dump();
    const RunConfig back = parse_config(path, {});
    EXPECT_EQ(back.train.epochs, 7u);
    EXPECT_EQ(back.train.model, rc.train.model);
    EXPECT_EQ(to_json(back), to_json(rc));
    std::filesystem::remove(path);
}

TEST(Config, SyntheticDatasetsFollowModelShape) {
    RunConfig rc = resolve(json::object(), {"model.image_side=8", "data.train_per_class=5", "data.test_per_class=3"});
    const auto [train_set, test_set] = load_datasets(rc);
    EXPECT_EQ(train_set.size(), 10u);
    EXPECT_EQ(test_set.size(), 6u);
    EXPECT_EQ(train_set.side, 8u);
    EXPECT_NE(train_set.images[0], test_set.images[0]);
    rc.data.source = "idx";
    EXPECT_THROW(load_datasets(rc), ConfigError);
}

TEST(Checkpoint, RoundTrip) {
    ModelConfig c;
    c.depth = 1;
    c.hidden = 8;
    c.heads = 2;
    c.mlp = 8;
    c.image_side = 8;
    const Model m = Model::initialize(c, 3);
    const auto path = std::filesystem::temp_directory_path() / "ovit_ckpt_test.json";
    save_model(path, m);
    const Model back = load_model(path);
    EXPECT_EQ(back.config(), m.config());
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
        EXPECT_EQ(back[i], m[i]);
        EXPECT_EQ(back.parameters()[i].role, m.parameters()[i].role);
    }
    std::filesystem::remove(path);
    EXPECT_THROW(model_from_json(json{{"model", to_json(c)}}), ConfigError);
}
