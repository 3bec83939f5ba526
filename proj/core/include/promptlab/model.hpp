#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promptlab/tensor.hpp"

namespace promptlab {

struct ModelConfig {
    std::size_t vocab_size = 512;
    std::size_t d_model = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d_ff = 256;
    std::size_t max_positions = 128;
    std::size_t controller_layers = 2;
    std::size_t controller_heads = 4;
    std::uint64_t seed = 0;

    /// Throws ConfigError on an unusable configuration.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

/// Named parameter groups. Freezing rules are expressed over these, and every
/// parameter belongs to exactly one of them.
enum class ParamGroup {
    WordEmbeddings,
    PositionEmbeddings,
    Body,
    Output,
    PromptPool,
    Controller,
};

std::string_view to_string(ParamGroup group);
ParamGroup parse_param_group(std::string_view name);

/// A handle onto a live parameter tensor. Writing through `tensor` writes the model.
struct NamedParameter {
    std::string name;
    ParamGroup group;
    Tensor tensor;
};

/// Pre-LN transformer block weights.
struct TransformerLayer {
    Tensor ln1_gain, ln1_bias;
    Tensor attn_weight, attn_bias;  // d x 3d fused q|k|v
    Tensor proj_weight, proj_bias;
    Tensor ln2_gain, ln2_bias;
    Tensor fc_weight, fc_bias;
    Tensor fc_out_weight, fc_out_bias;

    static TransformerLayer init(std::size_t d_model, std::size_t d_ff, std::mt19937_64& rng);
    TransformerLayer clone() const;
    void append_parameters(std::vector<NamedParameter>& out, const std::string& prefix,
                           ParamGroup group) const;
};

/// One causally-masked transformer block over rows of `x`.
Tensor transformer_layer_forward(const TransformerLayer& layer, const Tensor& x,
                                 std::size_t n_heads);

/// Decoder-only language model with tied input/output embeddings.
class LanguageModel {
public:
    explicit LanguageModel(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return config_; }

    /// Rows of the word-embedding table for `ids`.
    Tensor embed(std::span<const TokenId> ids) const;
    /// Rows of [word embeddings; extension], so ids >= vocab_size address `extension`.
    Tensor embed(std::span<const TokenId> ids, const Tensor& extension) const;

    /// Next-token logits [L x vocab] for input embeddings [L x d_model].
    /// Row t depends only on rows <= t.
    Tensor forward(const Tensor& input_embeddings, std::span<const TokenId> positions) const;

    const Tensor& word_embeddings() const noexcept { return word_embeddings_; }

    std::vector<NamedParameter> parameters() const;
    LanguageModel clone() const;

private:
    ModelConfig config_;
    Tensor word_embeddings_;
    Tensor position_embeddings_;
    std::vector<TransformerLayer> layers_;
    Tensor final_gain_, final_bias_;
};

/// Per-query prompt vectors; one row per query token.
struct PromptMatrix {
    Tensor vectors;

    std::size_t length() const { return vectors.rows(); }
};

/// Causal transformer encoder mapping query embeddings to prompt vectors of
/// width d_model. It has its own position table and output projection.
class Controller {
public:
    Controller(const ModelConfig& config, std::uint64_t seed);

    PromptMatrix forward(const Tensor& query_embeddings) const;

    std::vector<NamedParameter> parameters() const;
    Controller clone() const;

private:
    ModelConfig config_;
    Tensor position_embeddings_;
    std::vector<TransformerLayer> layers_;
    Tensor final_gain_, final_bias_;
    Tensor out_weight_, out_bias_;
};

/// Total scalar count per group over a parameter list.
std::vector<std::pair<ParamGroup, std::size_t>> parameter_census(
    std::span<const NamedParameter> params);

/// FNV-1a over the raw bytes of every parameter in order; used for freeze checks.
std::uint64_t parameter_checksum(std::span<const NamedParameter> params);

}  // namespace promptlab
