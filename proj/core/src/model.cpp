#include "promptlab/model.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <map>

#include "promptlab/errors.hpp"
#include "promptlab/seeding.hpp"

namespace promptlab {

namespace {

constexpr double kInitStd = 0.02;

Tensor normal_tensor(Shape shape, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, kInitStd);
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (double& v : t.mutable_values()) v = dist(rng);
    return t;
}

Tensor constant_tensor(std::size_t n, double value) { return Tensor::filled({n}, value, true); }

std::vector<TokenId> iota_ids(std::size_t n) {
    std::vector<TokenId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<TokenId>(i);
    return ids;
}

void check_positions(std::size_t rows, std::span<const TokenId> positions,
                     std::size_t max_positions) {
    if (rows > max_positions) {
        throw CapacityError("sequence of " + std::to_string(rows) +
                            " positions exceeds max_positions " + std::to_string(max_positions));
    }
    if (positions.size() != rows) {
        throw DimensionError("got " + std::to_string(positions.size()) + " positions for " +
                             std::to_string(rows) + " input rows");
    }
    for (TokenId p : positions) {
        if (p < 0 || static_cast<std::size_t>(p) >= max_positions) {
            throw CapacityError("position " + std::to_string(p) + " outside max_positions " +
                                std::to_string(max_positions));
        }
    }
}

}  // namespace

void ModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
    if (vocab_size == 0) fail("vocab_size must be positive");
    if (d_model == 0 || n_heads == 0 || controller_heads == 0) fail("zero width or head count");
    if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
    if (d_model % controller_heads != 0) fail("d_model must be divisible by controller_heads");
    if (d_ff == 0) fail("d_ff must be positive");
    if (max_positions == 0) fail("max_positions must be positive");
}

std::string_view to_string(ParamGroup group) {
    switch (group) {
        case ParamGroup::WordEmbeddings: return "word_embeddings";
        case ParamGroup::PositionEmbeddings: return "position_embeddings";
        case ParamGroup::Body: return "body";
        case ParamGroup::Output: return "output";
        case ParamGroup::PromptPool: return "prompt_pool";
        case ParamGroup::Controller: return "controller";
    }
    return "unknown";
}

ParamGroup parse_param_group(std::string_view name) {
    for (ParamGroup g : {ParamGroup::WordEmbeddings, ParamGroup::PositionEmbeddings,
                         ParamGroup::Body, ParamGroup::Output, ParamGroup::PromptPool,
                         ParamGroup::Controller}) {
        if (to_string(g) == name) return g;
    }
    throw FormatError("unknown parameter group '" + std::string(name) + "'");
}

// --- TransformerLayer ------------------------------------------------------

TransformerLayer TransformerLayer::init(std::size_t d, std::size_t d_ff, std::mt19937_64& rng) {
    TransformerLayer l;
    l.ln1_gain = constant_tensor(d, 1.0);
    l.ln1_bias = constant_tensor(d, 0.0);
    l.attn_weight = normal_tensor({d, 3 * d}, rng);
    l.attn_bias = constant_tensor(3 * d, 0.0);
    l.proj_weight = normal_tensor({d, d}, rng);
    l.proj_bias = constant_tensor(d, 0.0);
    l.ln2_gain = constant_tensor(d, 1.0);
    l.ln2_bias = constant_tensor(d, 0.0);
    l.fc_weight = normal_tensor({d, d_ff}, rng);
    l.fc_bias = constant_tensor(d_ff, 0.0);
    l.fc_out_weight = normal_tensor({d_ff, d}, rng);
    l.fc_out_bias = constant_tensor(d, 0.0);
    return l;
}

TransformerLayer TransformerLayer::clone() const {
    return {ln1_gain.clone(),  ln1_bias.clone(),     attn_weight.clone(), attn_bias.clone(),
            proj_weight.clone(), proj_bias.clone(),  ln2_gain.clone(),    ln2_bias.clone(),
            fc_weight.clone(), fc_bias.clone(),      fc_out_weight.clone(), fc_out_bias.clone()};
}

void TransformerLayer::append_parameters(std::vector<NamedParameter>& out,
                                         const std::string& prefix, ParamGroup group) const {
    const std::array<std::pair<const char*, const Tensor*>, 12> named{{
        {"ln1.gain", &ln1_gain},
        {"ln1.bias", &ln1_bias},
        {"attn.weight", &attn_weight},
        {"attn.bias", &attn_bias},
        {"proj.weight", &proj_weight},
        {"proj.bias", &proj_bias},
        {"ln2.gain", &ln2_gain},
        {"ln2.bias", &ln2_bias},
        {"fc.weight", &fc_weight},
        {"fc.bias", &fc_bias},
        {"fc_out.weight", &fc_out_weight},
        {"fc_out.bias", &fc_out_bias},
    }};
    for (const auto& [name, tensor] : named) out.push_back({prefix + name, group, *tensor});
}

Tensor transformer_layer_forward(const TransformerLayer& layer, const Tensor& x,
                                 std::size_t n_heads) {
    const std::size_t d = x.cols();
    const std::size_t head_dim = d / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

    Tensor h = layer_norm_rows(x, layer.ln1_gain, layer.ln1_bias);
    Tensor qkv = add_row_bias(matmul(h, layer.attn_weight), layer.attn_bias);
    std::vector<Tensor> heads;
    heads.reserve(n_heads);
    for (std::size_t i = 0; i < n_heads; ++i) {
        Tensor q = slice_cols(qkv, i * head_dim, head_dim);
        Tensor k = slice_cols(qkv, d + i * head_dim, head_dim);
        Tensor v = slice_cols(qkv, 2 * d + i * head_dim, head_dim);
        Tensor weights = causal_softmax_rows(scale(matmul_nt(q, k), inv_sqrt));
        heads.push_back(matmul(weights, v));
    }
    Tensor attended = n_heads == 1 ? heads.front() : concat_cols(heads);
    Tensor x1 = add(x, add_row_bias(matmul(attended, layer.proj_weight), layer.proj_bias));

    Tensor h2 = layer_norm_rows(x1, layer.ln2_gain, layer.ln2_bias);
    Tensor ff = gelu(add_row_bias(matmul(h2, layer.fc_weight), layer.fc_bias));
    return add(x1, add_row_bias(matmul(ff, layer.fc_out_weight), layer.fc_out_bias));
}

// --- LanguageModel -----------------------------------------------------------

LanguageModel::LanguageModel(const ModelConfig& config) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    word_embeddings_ = normal_tensor({config_.vocab_size, config_.d_model}, rng);
    position_embeddings_ = normal_tensor({config_.max_positions, config_.d_model}, rng);
    for (std::size_t i = 0; i < config_.n_layers; ++i) {
        layers_.push_back(TransformerLayer::init(config_.d_model, config_.d_ff, rng));
    }
    final_gain_ = constant_tensor(config_.d_model, 1.0);
    final_bias_ = constant_tensor(config_.d_model, 0.0);
}

Tensor LanguageModel::embed(std::span<const TokenId> ids) const {
    return gather_rows(word_embeddings_, ids);
}

Tensor LanguageModel::embed(std::span<const TokenId> ids, const Tensor& extension) const {
    return gather_rows(word_embeddings_, extension, ids);
}

Tensor LanguageModel::forward(const Tensor& input_embeddings,
                              std::span<const TokenId> positions) const {
    if (input_embeddings.rank() != 2 || input_embeddings.cols() != config_.d_model) {
        throw DimensionError("forward: input embeddings " +
                             shape_to_string(input_embeddings.shape()) + " need width " +
                             std::to_string(config_.d_model));
    }
    check_positions(input_embeddings.rows(), positions, config_.max_positions);

    Tensor x = add(input_embeddings, gather_rows(position_embeddings_, positions));
    for (const auto& layer : layers_) x = transformer_layer_forward(layer, x, config_.n_heads);
    Tensor h = layer_norm_rows(x, final_gain_, final_bias_);
    return matmul_nt(h, word_embeddings_);
}

std::vector<NamedParameter> LanguageModel::parameters() const {
    std::vector<NamedParameter> out;
    out.push_back({"lm.word_embeddings", ParamGroup::WordEmbeddings, word_embeddings_});
    out.push_back({"lm.position_embeddings", ParamGroup::PositionEmbeddings, position_embeddings_});
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].append_parameters(out, "lm.layer" + std::to_string(i) + ".", ParamGroup::Body);
    }
    out.push_back({"lm.final.gain", ParamGroup::Output, final_gain_});
    out.push_back({"lm.final.bias", ParamGroup::Output, final_bias_});
    return out;
}

LanguageModel LanguageModel::clone() const {
    LanguageModel copy = *this;
    copy.word_embeddings_ = word_embeddings_.clone();
    copy.position_embeddings_ = position_embeddings_.clone();
    for (auto& layer : copy.layers_) layer = layer.clone();
    copy.final_gain_ = final_gain_.clone();
    copy.final_bias_ = final_bias_.clone();
    return copy;
}

// --- Controller --------------------------------------------------------------

Controller::Controller(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(derive_seed(seed, "controller"));
    position_embeddings_ = normal_tensor({config_.max_positions, config_.d_model}, rng);
    for (std::size_t i = 0; i < config_.controller_layers; ++i) {
        layers_.push_back(TransformerLayer::init(config_.d_model, config_.d_ff, rng));
    }
    final_gain_ = constant_tensor(config_.d_model, 1.0);
    final_bias_ = constant_tensor(config_.d_model, 0.0);
    out_weight_ = normal_tensor({config_.d_model, config_.d_model}, rng);
    out_bias_ = constant_tensor(config_.d_model, 0.0);
}

PromptMatrix Controller::forward(const Tensor& query_embeddings) const {
    if (query_embeddings.rank() != 2 || query_embeddings.rows() == 0) {
        throw EmptyInputError("controller: empty query");
    }
    if (query_embeddings.cols() != config_.d_model) {
        throw DimensionError("controller: query embeddings " +
                             shape_to_string(query_embeddings.shape()) + " need width " +
                             std::to_string(config_.d_model));
    }
    const std::size_t m = query_embeddings.rows();
    const auto positions = iota_ids(m);
    check_positions(m, positions, config_.max_positions);

    Tensor x = add(query_embeddings, gather_rows(position_embeddings_, positions));
    for (const auto& layer : layers_) {
        x = transformer_layer_forward(layer, x, config_.controller_heads);
    }
    Tensor h = layer_norm_rows(x, final_gain_, final_bias_);
    return {add_row_bias(matmul(h, out_weight_), out_bias_)};
}

std::vector<NamedParameter> Controller::parameters() const {
    std::vector<NamedParameter> out;
    out.push_back({"controller.position_embeddings", ParamGroup::Controller, position_embeddings_});
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].append_parameters(out, "controller.layer" + std::to_string(i) + ".",
                                     ParamGroup::Controller);
    }
    out.push_back({"controller.final.gain", ParamGroup::Controller, final_gain_});
    out.push_back({"controller.final.bias", ParamGroup::Controller, final_bias_});
    out.push_back({"controller.out.weight", ParamGroup::Controller, out_weight_});
    out.push_back({"controller.out.bias", ParamGroup::Controller, out_bias_});
    return out;
}

Controller Controller::clone() const {
    Controller copy = *this;
    copy.position_embeddings_ = position_embeddings_.clone();
    for (auto& layer : copy.layers_) layer = layer.clone();
    copy.final_gain_ = final_gain_.clone();
    copy.final_bias_ = final_bias_.clone();
    copy.out_weight_ = out_weight_.clone();
    copy.out_bias_ = out_bias_.clone();
    return copy;
}

// --- census ------------------------------------------------------------------

std::vector<std::pair<ParamGroup, std::size_t>> parameter_census(
    std::span<const NamedParameter> params) {
    std::map<ParamGroup, std::size_t> counts;
    for (const auto& p : params) counts[p.group] += p.tensor.size();
    return {counts.begin(), counts.end()};
}

std::uint64_t parameter_checksum(std::span<const NamedParameter> params) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const auto& p : params) {
        const auto values = p.tensor.values();
        hash = fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()),
                                        values.size_bytes()),
                       hash);
    }
    return hash;
}

}  // namespace promptlab
