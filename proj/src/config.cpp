#include "ovit/config.hpp"

#include <fstream>

#include <fmt/format.h>

#include "ovit/errors.hpp"

namespace ovit {

using nlohmann::json;

namespace {

std::string joined(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

// Overlays `src` on `dst`; every key in src must already exist in dst.
void merge_known(json& dst, const json& src, const std::string& prefix) {
    if (!src.is_object())
        throw ConfigError(fmt::format("{}: expected a JSON object",
                                      prefix.empty() ? "config" : prefix));
    for (const auto& [key, value] : src.items()) {
        const std::string path = joined(prefix, key);
        if (!dst.contains(key)) throw ConfigError(fmt::format("unknown config key '{}'", path));
        json& slot = dst[key];
        if (slot.is_object())
            merge_known(slot, value, path);
        else
            slot = value;
    }
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (!node->is_object() || !node->contains(part))
            throw ConfigError(fmt::format("unknown config key '{}'", key));
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (node->is_object())
        throw ConfigError(fmt::format("override '{}' targets a section, not a value", key));

    // JSON literal when it parses (numbers, booleans, quoted strings), bare string otherwise.
    json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = text;
    *node = std::move(value);
}

std::size_t get_size(const json& j, const char* key, const std::string& prefix) {
    const json& v = j.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
        throw ConfigError(fmt::format("{}: expected a non-negative integer, got {}",
                                      joined(prefix, key), v.dump()));
    return v.get<std::size_t>();
}

std::uint64_t get_u64(const json& j, const char* key, const std::string& prefix) {
    return static_cast<std::uint64_t>(get_size(j, key, prefix));
}

double get_double(const json& j, const char* key, const std::string& prefix) {
    const json& v = j.at(key);
    if (!v.is_number())
        throw ConfigError(fmt::format("{}: expected a number, got {}", joined(prefix, key), v.dump()));
    return v.get<double>();
}

bool get_bool(const json& j, const char* key, const std::string& prefix) {
    const json& v = j.at(key);
    if (!v.is_boolean())
        throw ConfigError(fmt::format("{}: expected true or false, got {}", joined(prefix, key), v.dump()));
    return v.get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& prefix) {
    const json& v = j.at(key);
    if (!v.is_string())
        throw ConfigError(fmt::format("{}: expected a string, got {}", joined(prefix, key), v.dump()));
    return v.get<std::string>();
}

ModelConfig read_model(const json& j, const std::string& prefix) {
    ModelConfig c;
    c.depth = get_size(j, "depth", prefix);
    c.heads = get_size(j, "heads", prefix);
    c.hidden = get_size(j, "hidden", prefix);
    c.mlp = get_size(j, "mlp", prefix);
    c.patch = get_size(j, "patch", prefix);
    c.classes = get_size(j, "classes", prefix);
    c.image_side = get_size(j, "image_side", prefix);
    c.channels = get_size(j, "channels", prefix);
    c.mode = parse_param_mode(get_string(j, "mode", prefix));
    return c;
}

} // namespace

json to_json(const ModelConfig& c) {
    return {{"depth", c.depth},     {"heads", c.heads},
            {"hidden", c.hidden},   {"mlp", c.mlp},
            {"patch", c.patch},     {"classes", c.classes},
            {"image_side", c.image_side}, {"channels", c.channels},
            {"mode", std::string(to_string(c.mode))}};
}

ModelConfig model_config_from_json(const json& j) {
    json merged = to_json(ModelConfig{});
    merge_known(merged, j, "model");
    ModelConfig c = read_model(merged, "model");
    c.validate();
    return c;
}

json to_json(const RunConfig& rc) {
    const TrainConfig& t = rc.train;
    const DataConfig& d = rc.data;
    return {{"lr", t.lr},
            {"momentum", t.momentum},
            {"weight_decay", t.weight_decay},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"seed", t.seed},
            {"optimizer", std::string(to_string(t.optimizer))},
            {"penalty_lambda", t.penalty_lambda},
            {"augment", t.augment},
            {"model", to_json(t.model)},
            {"data",
             {{"source", d.source},
              {"train_per_class", d.train_per_class},
              {"test_per_class", d.test_per_class},
              {"noise_std", d.noise_std},
              {"seed", d.seed},
              {"train_images", d.train_images},
              {"train_labels", d.train_labels},
              {"test_images", d.test_images},
              {"test_labels", d.test_labels}}}};
}

RunConfig resolve_config(const json& document, std::span<const std::string> overrides) {
    json doc = to_json(RunConfig{});
    merge_known(doc, document, "");
    for (const std::string& o : overrides) apply_override(doc, o);

    RunConfig rc;
    TrainConfig& t = rc.train;
    t.lr = get_double(doc, "lr", "");
    t.momentum = get_double(doc, "momentum", "");
    t.weight_decay = get_double(doc, "weight_decay", "");
    t.epochs = get_size(doc, "epochs", "");
    t.batch_size = get_size(doc, "batch_size", "");
    t.seed = get_u64(doc, "seed", "");
    t.optimizer = parse_optimizer(get_string(doc, "optimizer", ""));
    t.penalty_lambda = get_double(doc, "penalty_lambda", "");
    t.augment = get_bool(doc, "augment", "");
    t.model = read_model(doc.at("model"), "model");

    const json& d = doc.at("data");
    DataConfig& dc = rc.data;
    dc.source = get_string(d, "source", "data");
    dc.train_per_class = get_size(d, "train_per_class", "data");
    dc.test_per_class = get_size(d, "test_per_class", "data");
    dc.noise_std = get_double(d, "noise_std", "data");
    dc.seed = get_u64(d, "seed", "data");
    dc.train_images = get_string(d, "train_images", "data");
    dc.train_labels = get_string(d, "train_labels", "data");
    dc.test_images = get_string(d, "test_images", "data");
    dc.test_labels = get_string(d, "test_labels", "data");
    if (dc.source != "synthetic" && dc.source != "idx")
        throw ConfigError(fmt::format("data.source: expected synthetic or idx, got '{}'", dc.source));
    if (dc.noise_std < 0.0) throw ConfigError("data.noise_std must be >= 0");

    t.validate();
    return rc;
}

RunConfig parse_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
    json document = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
        try {
            document = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(fmt::format("config file '{}' is not valid JSON: {}", path.string(), e.what()));
        }
    }
    return resolve_config(document, overrides);
}

std::pair<Dataset, Dataset> load_datasets(const RunConfig& config) {
    const ModelConfig& m = config.train.model;
    const DataConfig& d = config.data;
    if (d.source == "synthetic") {
        if (m.channels != 1) throw ConfigError("data.source=synthetic needs model.channels=1");
        Rng seeds(d.seed);
        return {generate_synthetic(m.classes, d.train_per_class, m.image_side, d.noise_std, d.seed),
                generate_synthetic(m.classes, d.test_per_class, m.image_side, d.noise_std,
                                   seeds.split(1).seed())};
    }
    for (const auto& [key, value] :
         {std::pair{"data.train_images", d.train_images}, {"data.train_labels", d.train_labels},
          {"data.test_images", d.test_images}, {"data.test_labels", d.test_labels}})
        if (value.empty()) throw ConfigError(fmt::format("{} is required for data.source=idx", key));
    return {load_idx_dataset(d.train_images, d.train_labels, m.classes),
            load_idx_dataset(d.test_images, d.test_labels, m.classes)};
}

json model_to_json(const Model& model) {
    json params = json::array();
    for (const Parameter& p : model.parameters())
        params.push_back({{"name", p.name},
                          {"rows", p.value.rows()},
                          {"cols", p.value.cols()},
                          {"data", std::vector<double>(p.value.data().begin(), p.value.data().end())}});
    return {{"model", to_json(model.config())}, {"parameters", std::move(params)}};
}

Model model_from_json(const json& j) {
    try {
        ModelConfig config = model_config_from_json(j.at("model"));
        std::vector<Parameter> params;
        for (const json& p : j.at("parameters"))
            params.push_back({p.at("name").get<std::string>(), ParamRole::attention,
                              Matrix(p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>(),
                                     p.at("data").get<std::vector<double>>())});
        return Model(config, std::move(params));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("malformed model checkpoint: {}", e.what()));
    }
}

void save_model(const std::filesystem::path& path, const Model& model) {
    std::ofstream out(path);
    if (!out) throw ConfigError(fmt::format("cannot write checkpoint '{}'", path.string()));
    out << model_to_json(model).dump() << '\n';
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open checkpoint '{}'", path.string()));
    try {
        return model_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("checkpoint '{}' is not valid JSON: {}", path.string(), e.what()));
    }
}

} // namespace ovit
