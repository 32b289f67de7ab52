#pragma once

// A small vision transformer whose per-head query/key/value maps can be
// realized four ways (ParamMode):
//
//   plain    W used as stored
//   penalty  W used as stored; the loss adds lambda * ||W W^T - E||_F^2
//   cayley   cayley(W - W^T)
//   exp      matrix_exp(W - W^T)
//
// Heads act on d_k-column bands of the token matrix with square d_k x d_k
// maps, so every mode shares the same parameter shapes. The output
// projection and the MLP are never constrained.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ovit/autodiff.hpp"
#include "ovit/data.hpp"
#include "ovit/matrix.hpp"

namespace ovit {

enum class ParamMode { plain, cayley, exp, penalty };

std::string_view to_string(ParamMode mode);
// Throws ConfigError on an unknown name.
ParamMode parse_param_mode(std::string_view name);
inline bool is_orthogonal(ParamMode mode) { return mode == ParamMode::cayley || mode == ParamMode::exp; }

struct ModelConfig {
    std::size_t depth = 2;
    std::size_t heads = 4;
    std::size_t hidden = 64;
    std::size_t mlp = 128;
    std::size_t patch = 4;
    std::size_t classes = 2;
    std::size_t image_side = 16;
    std::size_t channels = 1;
    ParamMode mode = ParamMode::cayley;

    std::size_t head_dim() const { return hidden / heads; }
    std::size_t tokens() const { return (image_side / patch) * (image_side / patch); }
    std::size_t patch_dim() const { return patch * patch * channels; }

    // Throws ConfigError naming the offending field.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class ParamRole {
    patch_weight,
    patch_bias,
    position,
    attention,
    output_projection,
    mlp_in,
    mlp_in_bias,
    mlp_out,
    mlp_out_bias,
    head_weight,
    head_bias,
};

struct Parameter {
    std::string name;
    ParamRole role;
    Matrix value;
};

// Fixed ordering of the parameter list.
class ParamLayout {
public:
    explicit ParamLayout(const ModelConfig& config);

    std::size_t patch_weight() const { return 0; }
    std::size_t patch_bias() const { return 1; }
    std::size_t position() const { return 2; }
    std::size_t query(std::size_t block, std::size_t head) const { return block_base(block) + 3 * head; }
    std::size_t key(std::size_t block, std::size_t head) const { return query(block, head) + 1; }
    std::size_t value(std::size_t block, std::size_t head) const { return query(block, head) + 2; }
    std::size_t output(std::size_t block) const { return block_base(block) + 3 * heads_; }
    std::size_t mlp_in(std::size_t block) const { return output(block) + 1; }
    std::size_t mlp_in_bias(std::size_t block) const { return output(block) + 2; }
    std::size_t mlp_out(std::size_t block) const { return output(block) + 3; }
    std::size_t mlp_out_bias(std::size_t block) const { return output(block) + 4; }
    std::size_t head_weight() const { return block_base(depth_); }
    std::size_t head_bias() const { return head_weight() + 1; }
    std::size_t count() const { return head_weight() + 2; }

private:
    std::size_t block_base(std::size_t block) const { return 3 + block * (3 * heads_ + 5); }
    std::size_t depth_;
    std::size_t heads_;
};

class Model {
public:
    // Raw weights uniform in [-0.1, 0.1]; biases and positional embedding zero.
    static Model initialize(const ModelConfig& config, std::uint64_t seed);
    // Takes an explicit parameter list (e.g. from a checkpoint); shapes are validated.
    Model(ModelConfig config, std::vector<Parameter> parameters);

    const ModelConfig& config() const noexcept { return config_; }
    const ParamLayout& layout() const noexcept { return layout_; }
    std::span<const Parameter> parameters() const noexcept { return params_; }
    std::span<Parameter> parameters() noexcept { return params_; }
    const Matrix& operator[](std::size_t index) const { return params_.at(index).value; }
    Matrix& operator[](std::size_t index) { return params_.at(index).value; }

    // Indices of every per-head query/key/value matrix.
    std::vector<std::size_t> attention_indices() const;

private:
    ModelConfig config_;
    ParamLayout layout_;
    std::vector<Parameter> params_;
};

// Effective weight for a raw attention matrix, differentiable on the tape.
ad::Var parameterize(ad::Var raw, ParamMode mode);
Matrix parameterize(const Matrix& raw, ParamMode mode);

struct HeadWeights {
    ad::Var query;
    ad::Var key;
    ad::Var value;
};

struct HeadProjections {
    ad::Var q;
    ad::Var k;
    ad::Var v;
};

HeadWeights parameterize_head(const HeadWeights& raw, ParamMode mode);
// x times already-parameterized weights.
HeadProjections project_head(ad::Var x, const HeadWeights& effective);
// Q = x P(A_Q), K = x P(A_K), V = x P(A_V) from raw matrices.
HeadProjections orthogonal_self_attention(ad::Var x, const HeadWeights& raw, ParamMode mode);

// softmax(q k^T / sqrt(d_k)) v, row-wise max-subtracted softmax.
ad::Var scaled_dot_attention(ad::Var q, ad::Var k, ad::Var v);

// concat(head_1 .. head_n) w_o, head i attending over the i-th d_k-column
// band of x with effective weights heads[i].
ad::Var multi_head(ad::Var x, std::span<const HeadWeights> heads, ad::Var w_o);

// Patch pixels as a tokens x (patch^2 channels) matrix: tokens in row-major
// patch order, pixels within a token row-major then by channel.
Matrix extract_patches(const Image& image, const ModelConfig& config);
// extract_patches(image) w + b, plus one positional row per token.
ad::Var patch_embed(ad::Var patches, ad::Var weight, ad::Var bias, ad::Var position);

// Model parameters bound to a tape, with the effective attention weights
// computed once so every sample in a batch shares them.
class BoundModel {
public:
    // trainable=false binds parameters as constants (inference only).
    BoundModel(ad::Tape& tape, const Model& model, bool trainable = true);
    // Uses caller-created vars, one per model parameter in layout order.
    BoundModel(const Model& model, std::span<const ad::Var> vars);

    std::span<const ad::Var> leaves() const noexcept { return vars_; }
    ad::Var leaf(std::size_t index) const { return vars_.at(index); }

    // Token trunk: blocks, mean pool, class head. tokens is tokens x hidden.
    ad::Var forward_tokens(ad::Var tokens) const;
    // 1 x classes logits for one image.
    ad::Var forward_image(const Image& image) const;
    // batch x classes logits.
    ad::Var forward(std::span<const Image> images) const;
    // Sum of ||W W^T - E||_F^2 over every raw attention matrix.
    ad::Var orthogonality_penalty() const;

private:
    void bind_attention();

    ad::Tape* tape_;
    const Model* model_;
    std::vector<ad::Var> vars_;
    // [block][head]
    std::vector<std::vector<HeadWeights>> effective_;
};

// Inference-only logits, batch x classes.
Matrix forward(const Model& model, std::span<const Image> images);

// Largest ||W^T W - E||_F over the effective query/key/value weights.
double max_orthogonality_error(const Model& model);

struct ParamCount {
    std::size_t stored = 0;
    std::size_t effective = 0;
};

// stored: every float held. effective: each orthogonally parameterized
// d_k x d_k matrix counts d_k (d_k - 1) / 2.
ParamCount param_count(const Model& model);
ParamCount param_count(const ModelConfig& config);

} // namespace ovit
