#include "ovit/model.hpp"

#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "ovit/errors.hpp"
#include "ovit/orthogonal.hpp"
#include "ovit/random.hpp"

namespace ovit {

std::string_view to_string(ParamMode mode) {
    switch (mode) {
    case ParamMode::plain: return "plain";
    case ParamMode::cayley: return "cayley";
    case ParamMode::exp: return "exp";
    case ParamMode::penalty: return "penalty";
    }
    return "unknown";
}

ParamMode parse_param_mode(std::string_view name) {
    for (ParamMode m : {ParamMode::plain, ParamMode::cayley, ParamMode::exp, ParamMode::penalty})
        if (to_string(m) == name) return m;
    throw ConfigError(fmt::format("mode: unknown parameterization '{}' "
                                  "(expected plain, cayley, exp or penalty)",
                                  name));
}

void ModelConfig::validate() const {
    auto positive = [](std::size_t v, const char* key) {
        if (v == 0) throw ConfigError(fmt::format("model.{} must be positive", key));
    };
    positive(depth, "depth");
    positive(heads, "heads");
    positive(hidden, "hidden");
    positive(mlp, "mlp");
    positive(patch, "patch");
    positive(classes, "classes");
    positive(image_side, "image_side");
    positive(channels, "channels");
    if (hidden % heads != 0)
        throw ConfigError(
            fmt::format("model.heads: hidden size {} is not divisible by {} heads", hidden, heads));
    if (image_side % patch != 0)
        throw ConfigError(fmt::format("model.patch: image side {} is not divisible by patch {}",
                                      image_side, patch));
    if (classes < 2) throw ConfigError("model.classes must be at least 2");
}

ParamLayout::ParamLayout(const ModelConfig& config) : depth_(config.depth), heads_(config.heads) {}

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-0.1, 0.1);
    return m;
}

std::vector<Parameter> allocate(const ModelConfig& c, Rng* rng) {
    auto weight = [&](std::size_t r, std::size_t k) {
        return rng ? uniform_matrix(r, k, *rng) : Matrix(r, k);
    };
    const std::size_t d = c.hidden, dk = c.head_dim();
    std::vector<Parameter> p;
    p.push_back({"patch.weight", ParamRole::patch_weight, weight(c.patch_dim(), d)});
    p.push_back({"patch.bias", ParamRole::patch_bias, Matrix(1, d)});
    p.push_back({"position", ParamRole::position, Matrix(c.tokens(), d)});
    for (std::size_t b = 0; b < c.depth; ++b) {
        for (std::size_t h = 0; h < c.heads; ++h)
            for (const char* which : {"query", "key", "value"})
                p.push_back({fmt::format("block{}.head{}.{}", b, h, which), ParamRole::attention,
                             weight(dk, dk)});
        p.push_back({fmt::format("block{}.output", b), ParamRole::output_projection, weight(d, d)});
        p.push_back({fmt::format("block{}.mlp_in", b), ParamRole::mlp_in, weight(d, c.mlp)});
        p.push_back({fmt::format("block{}.mlp_in_bias", b), ParamRole::mlp_in_bias, Matrix(1, c.mlp)});
        p.push_back({fmt::format("block{}.mlp_out", b), ParamRole::mlp_out, weight(c.mlp, d)});
        p.push_back({fmt::format("block{}.mlp_out_bias", b), ParamRole::mlp_out_bias, Matrix(1, d)});
    }
    p.push_back({"head.weight", ParamRole::head_weight, weight(d, c.classes)});
    p.push_back({"head.bias", ParamRole::head_bias, Matrix(1, c.classes)});
    return p;
}

} // namespace

Model Model::initialize(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    return Model(config, allocate(config, &rng));
}

Model::Model(ModelConfig config, std::vector<Parameter> parameters)
    : config_(config), layout_(config), params_(std::move(parameters)) {
    config_.validate();
    const auto expected = allocate(config_, nullptr);
    if (params_.size() != expected.size())
        throw ConfigError(fmt::format("model expects {} parameter matrices, got {}",
                                      expected.size(), params_.size()));
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const Matrix& want = expected[i].value;
        const Matrix& got = params_[i].value;
        if (got.rows() != want.rows() || got.cols() != want.cols())
            throw ShapeError(fmt::format("parameter {} ({}) is {}, expected {}", i,
                                         expected[i].name, got.shape_string(),
                                         want.shape_string()));
        params_[i].name = expected[i].name;
        params_[i].role = expected[i].role;
    }
}

std::vector<std::size_t> Model::attention_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].role == ParamRole::attention) out.push_back(i);
    return out;
}

ad::Var parameterize(ad::Var raw, ParamMode mode) {
    if (mode == ParamMode::plain || mode == ParamMode::penalty) return raw;
    const Matrix& w = raw.value();
    if (!w.is_square())
        throw ShapeError(fmt::format("parameterize: {} mode needs a square matrix, got {}",
                                     to_string(mode), w.shape_string()));
    ad::Tape& tape = *raw.tape;
    const std::size_t n = w.rows();
    const ad::Var x = ad::subtract(raw, ad::transpose(raw));
    const ad::Var eye = tape.constant(Matrix::identity(n));

    if (mode == ParamMode::cayley)
        return ad::subtract(ad::scale(ad::inverse(ad::add(eye, x)), 2.0), eye);

    // Same scaling, series and squaring steps as matrix_exp(), recorded on the tape.
    const int s = exp_squarings(x.value());
    const ad::Var scaled = ad::scale(x, std::ldexp(1.0, -s));
    ad::Var result = eye;
    ad::Var term = eye;
    for (int k = 1; k <= kExpMaxTerms; ++k) {
        term = ad::scale(ad::matmul(term, scaled), 1.0 / k);
        result = ad::add(result, term);
        if (frobenius_norm(term.value()) < kExpTermTolerance) break;
    }
    for (int i = 0; i < s; ++i) result = ad::matmul(result, result);
    return result;
}

Matrix parameterize(const Matrix& raw, ParamMode mode) {
    switch (mode) {
    case ParamMode::plain:
    case ParamMode::penalty: return raw;
    case ParamMode::cayley: return cayley(skew_symmetrize(raw)).matrix();
    case ParamMode::exp: return matrix_exp(skew_symmetrize(raw)).matrix();
    }
    return raw;
}

HeadWeights parameterize_head(const HeadWeights& raw, ParamMode mode) {
    return {parameterize(raw.query, mode), parameterize(raw.key, mode),
            parameterize(raw.value, mode)};
}

HeadProjections project_head(ad::Var x, const HeadWeights& effective) {
    return {ad::matmul(x, effective.query), ad::matmul(x, effective.key),
            ad::matmul(x, effective.value)};
}

HeadProjections orthogonal_self_attention(ad::Var x, const HeadWeights& raw, ParamMode mode) {
    return project_head(x, parameterize_head(raw, mode));
}

ad::Var scaled_dot_attention(ad::Var q, ad::Var k, ad::Var v) {
    const Matrix &qm = q.value(), &km = k.value(), &vm = v.value();
    if (qm.cols() != km.cols())
        throw ShapeError(fmt::format("scaled_dot_attention: q is {}, k is {}", qm.shape_string(),
                                     km.shape_string()));
    if (km.rows() != vm.rows())
        throw ShapeError(fmt::format("scaled_dot_attention: k is {}, v is {}", km.shape_string(),
                                     vm.shape_string()));
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(qm.cols()));
    const ad::Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_dk);
    return ad::matmul(ad::row_softmax(scores), v);
}

ad::Var multi_head(ad::Var x, std::span<const HeadWeights> heads, ad::Var w_o) {
    const std::size_t d = x.value().cols();
    if (heads.empty() || d % heads.size() != 0)
        throw ConfigError(fmt::format("multi_head: width {} is not divisible by {} heads", d,
                                      heads.size()));
    const std::size_t dk = d / heads.size();
    std::vector<ad::Var> outputs;
    outputs.reserve(heads.size());
    for (std::size_t h = 0; h < heads.size(); ++h) {
        const ad::Var band = ad::slice_cols(x, h * dk, dk);
        const HeadProjections p = project_head(band, heads[h]);
        outputs.push_back(scaled_dot_attention(p.q, p.k, p.v));
    }
    return ad::matmul(heads.size() == 1 ? outputs.front() : ad::concat_cols(outputs), w_o);
}

Matrix extract_patches(const Image& image, const ModelConfig& config) {
    const std::size_t side = config.image_side, p = config.patch, ch = config.channels;
    if (side % p != 0)
        throw ConfigError(fmt::format("patch_embed: image side {} not divisible by patch {}", side, p));
    if (image.height != side || image.width != side || image.channels != ch)
        throw ShapeError(fmt::format("patch_embed: image is {}x{}x{}, model expects {}x{}x{}",
                                     image.height, image.width, image.channels, side, side, ch));
    const std::size_t per_row = side / p;
    Matrix out(per_row * per_row, p * p * ch);
    for (std::size_t t = 0; t < out.rows(); ++t) {
        const std::size_t y0 = (t / per_row) * p, x0 = (t % per_row) * p;
        std::size_t k = 0;
        for (std::size_t dy = 0; dy < p; ++dy)
            for (std::size_t dx = 0; dx < p; ++dx)
                for (std::size_t c = 0; c < ch; ++c) out(t, k++) = image.at(y0 + dy, x0 + dx, c);
    }
    return out;
}

ad::Var patch_embed(ad::Var patches, ad::Var weight, ad::Var bias, ad::Var position) {
    return ad::add(ad::add_row(ad::matmul(patches, weight), bias), position);
}

BoundModel::BoundModel(ad::Tape& tape, const Model& model, bool trainable)
    : tape_(&tape), model_(&model) {
    for (const Parameter& p : model.parameters())
        vars_.push_back(trainable ? tape.leaf(p.value) : tape.constant(p.value));
    bind_attention();
}

BoundModel::BoundModel(const Model& model, std::span<const ad::Var> vars)
    : tape_(vars.empty() ? nullptr : vars.front().tape), model_(&model), vars_(vars.begin(), vars.end()) {
    const auto params = model.parameters();
    if (vars_.size() != params.size())
        throw ShapeError(fmt::format("BoundModel: {} vars for {} parameters", vars_.size(), params.size()));
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        const Matrix& v = vars_[i].value();
        if (vars_[i].tape != tape_ || v.rows() != params[i].value.rows() ||
            v.cols() != params[i].value.cols())
            throw ShapeError(fmt::format("BoundModel: var {} does not match parameter {}", i,
                                         params[i].name));
    }
    bind_attention();
}

void BoundModel::bind_attention() {
    const ModelConfig& c = model_->config();
    const ParamLayout& L = model_->layout();
    for (std::size_t b = 0; b < c.depth; ++b) {
        std::vector<HeadWeights> heads;
        for (std::size_t h = 0; h < c.heads; ++h)
            heads.push_back(parameterize_head(
                {vars_[L.query(b, h)], vars_[L.key(b, h)], vars_[L.value(b, h)]}, c.mode));
        effective_.push_back(std::move(heads));
    }
}

ad::Var BoundModel::forward_tokens(ad::Var tokens) const {
    const ModelConfig& c = model_->config();
    const ParamLayout& L = model_->layout();
    if (tokens.value().cols() != c.hidden)
        throw ShapeError(fmt::format("forward_tokens: tokens are {}, hidden size is {}",
                                     tokens.value().shape_string(), c.hidden));
    ad::Var x = tokens;
    for (std::size_t b = 0; b < c.depth; ++b) {
        const ad::Var attended = multi_head(x, effective_[b], vars_[L.output(b)]);
        const ad::Var h = ad::add(x, attended);
        const ad::Var hidden =
            ad::tanh(ad::add_row(ad::matmul(h, vars_[L.mlp_in(b)]), vars_[L.mlp_in_bias(b)]));
        const ad::Var mlp = ad::add_row(ad::matmul(hidden, vars_[L.mlp_out(b)]), vars_[L.mlp_out_bias(b)]);
        x = ad::add(h, mlp);
    }
    const ad::Var pooled = ad::mean_rows(x);
    return ad::add_row(ad::matmul(pooled, vars_[L.head_weight()]), vars_[L.head_bias()]);
}

ad::Var BoundModel::forward_image(const Image& image) const {
    const ParamLayout& L = model_->layout();
    const ad::Var patches = tape_->constant(extract_patches(image, model_->config()));
    const ad::Var tokens = patch_embed(patches, vars_[L.patch_weight()], vars_[L.patch_bias()],
                                       vars_[L.position()]);
    return forward_tokens(tokens);
}

ad::Var BoundModel::forward(std::span<const Image> images) const {
    if (images.empty()) throw ShapeError("forward: empty batch");
    std::vector<ad::Var> rows;
    rows.reserve(images.size());
    for (const Image& im : images) rows.push_back(forward_image(im));
    return rows.size() == 1 ? rows.front() : ad::concat_rows(rows);
}

ad::Var BoundModel::orthogonality_penalty() const {
    std::vector<ad::Var> terms;
    for (std::size_t idx : model_->attention_indices()) {
        const ad::Var w = vars_[idx];
        const std::size_t n = w.value().rows();
        const ad::Var gap =
            ad::subtract(ad::matmul(w, ad::transpose(w)), tape_->constant(Matrix::identity(n)));
        terms.push_back(ad::sum(ad::hadamard(gap, gap)));
    }
    ad::Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
    return total;
}

Matrix forward(const Model& model, std::span<const Image> images) {
    ad::Tape tape;
    BoundModel bound(tape, model, /*trainable=*/false);
    return bound.forward(images).value();
}

double max_orthogonality_error(const Model& model) {
    double worst = 0.0;
    for (std::size_t idx : model.attention_indices())
        worst = std::max(worst, orthogonality_error(parameterize(model[idx], model.config().mode)));
    return worst;
}

ParamCount param_count(const ModelConfig& config) {
    config.validate();
    ParamCount count;
    const std::size_t dk = config.head_dim();
    for (const Parameter& p : allocate(config, nullptr)) {
        count.stored += p.value.size();
        const bool constrained = p.role == ParamRole::attention && is_orthogonal(config.mode);
        count.effective += constrained ? dk * (dk - 1) / 2 : p.value.size();
    }
    return count;
}

ParamCount param_count(const Model& model) { return param_count(model.config()); }

} // namespace ovit
