#include "promptlab/adaptation.hpp"

#include <cmath>
#include <random>

#include "promptlab/errors.hpp"
#include "promptlab/seeding.hpp"

namespace promptlab {

namespace {

std::vector<TokenId> iota_ids(std::size_t begin, std::size_t count) {
    std::vector<TokenId> ids(count);
    for (std::size_t i = 0; i < count; ++i) ids[i] = static_cast<TokenId>(begin + i);
    return ids;
}

}  // namespace

std::string_view to_string(RegimeKind kind) {
    switch (kind) {
        case RegimeKind::FineTune: return "fine_tune";
        case RegimeKind::SoftPrompt: return "soft_prompt";
        case RegimeKind::DynamicPrompt: return "dynamic_prompt";
    }
    return "unknown";
}

RegimeKind parse_regime_kind(std::string_view name) {
    for (RegimeKind k : {RegimeKind::FineTune, RegimeKind::SoftPrompt, RegimeKind::DynamicPrompt}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown regime '" + std::string(name) +
                      "' (expected fine_tune, soft_prompt or dynamic_prompt)");
}

void DialogPair::validate(std::size_t vocab_size) const {
    if (query.empty()) throw EmptyInputError("dialog pair has an empty query");
    if (response.empty()) throw EmptyInputError("dialog pair has an empty response");
    for (const auto* part : {&query, &response}) {
        for (TokenId id : *part) {
            if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
                throw VocabularyError("token id " + std::to_string(id) +
                                      " outside vocabulary of " + std::to_string(vocab_size));
            }
        }
    }
}

// --- PromptPool --------------------------------------------------------------

PromptPool::PromptPool(std::size_t capacity, std::size_t d_model, std::uint64_t seed) {
    if (capacity == 0) throw ConfigError("prompt pool capacity must be positive");
    std::mt19937_64 rng(derive_seed(seed, "prompt_pool"));
    std::normal_distribution<double> dist(0.0, 0.02);
    embeddings_ = Tensor::zeros({capacity, d_model}, true);
    for (double& v : embeddings_.mutable_values()) v = dist(rng);
}

std::vector<NamedParameter> PromptPool::parameters() const {
    return {{"prompt_pool.embeddings", ParamGroup::PromptPool, embeddings_}};
}

PromptPool PromptPool::clone() const {
    PromptPool copy = *this;
    copy.embeddings_ = embeddings_.clone();
    return copy;
}

// --- AdaptationRegime --------------------------------------------------------

AdaptationRegime AdaptationRegime::create(RegimeKind kind, const ModelConfig& config,
                                          std::size_t pool_capacity, std::uint64_t seed) {
    AdaptationRegime regime;
    regime.kind = kind;
    if (kind == RegimeKind::SoftPrompt) {
        regime.prompt_pool.emplace(pool_capacity, config.d_model, seed);
    } else if (kind == RegimeKind::DynamicPrompt) {
        regime.controller.emplace(config, seed);
    }
    return regime;
}

void AdaptationRegime::validate() const {
    switch (kind) {
        case RegimeKind::FineTune:
            if (prompt_pool || controller) {
                throw ConfigError("fine_tune regime carries no prompt pool or controller");
            }
            break;
        case RegimeKind::SoftPrompt:
            if (!prompt_pool || controller) {
                throw ConfigError("soft_prompt regime needs exactly a prompt pool");
            }
            break;
        case RegimeKind::DynamicPrompt:
            if (!controller || prompt_pool) {
                throw ConfigError("dynamic_prompt regime needs exactly a controller");
            }
            break;
    }
}

std::vector<NamedParameter> AdaptationRegime::parameters() const {
    if (prompt_pool) return prompt_pool->parameters();
    if (controller) return controller->parameters();
    return {};
}

AdaptationRegime AdaptationRegime::clone() const {
    AdaptationRegime copy;
    copy.kind = kind;
    if (prompt_pool) copy.prompt_pool = prompt_pool->clone();
    if (controller) copy.controller = controller->clone();
    return copy;
}

// --- assembly ----------------------------------------------------------------

std::size_t prompt_length(RegimeKind kind, std::size_t query_length) {
    return kind == RegimeKind::FineTune ? 0 : query_length;
}

PromptMatrix build_prompt(const AdaptationRegime& regime, const LanguageModel& lm,
                          std::span<const TokenId> query, const Tensor& query_embeddings) {
    if (query.empty()) throw EmptyInputError("empty query");
    const std::size_t m = query.size();
    switch (regime.kind) {
        case RegimeKind::FineTune:
            return {};
        case RegimeKind::SoftPrompt: {
            const PromptPool& pool = regime.prompt_pool.value();
            if (m > pool.capacity()) {
                throw CapacityError("query of " + std::to_string(m) +
                                    " tokens exceeds prompt pool capacity " +
                                    std::to_string(pool.capacity()));
            }
            // Pool rows live after the vocabulary in the extended embedding table.
            const auto ids = iota_ids(lm.config().vocab_size, m);
            return {lm.embed(ids, pool.embeddings())};
        }
        case RegimeKind::DynamicPrompt:
            return regime.controller.value().forward(query_embeddings);
    }
    return {};
}

Tensor assemble_prefix(const AdaptationRegime& regime, const LanguageModel& lm,
                       std::span<const TokenId> query) {
    if (query.empty()) throw EmptyInputError("empty query");
    const std::size_t prefix = prompt_length(regime.kind, query.size()) + query.size();
    if (prefix > lm.config().max_positions) {
        throw CapacityError("prompt and query need " + std::to_string(prefix) +
                            " positions, max_positions is " +
                            std::to_string(lm.config().max_positions));
    }
    Tensor query_embeddings = lm.embed(query);
    if (regime.kind == RegimeKind::FineTune) return query_embeddings;
    PromptMatrix prompt = build_prompt(regime, lm, query, query_embeddings);
    const std::vector<Tensor> parts{prompt.vectors, query_embeddings};
    return concat_rows(parts);
}

AssembledExample assemble_input(const AdaptationRegime& regime, const LanguageModel& lm,
                                const DialogPair& pair) {
    pair.validate(lm.config().vocab_size);
    const std::size_t m = pair.query_length();
    const std::size_t prompt_len = prompt_length(regime.kind, m);
    const std::size_t max_positions = lm.config().max_positions;
    if (prompt_len + m + 1 > max_positions) {
        throw CapacityError("query of " + std::to_string(m) + " tokens leaves no room for a " +
                            "response within max_positions " + std::to_string(max_positions));
    }
    const std::size_t response_len =
        std::min(pair.response.size(), max_positions - prompt_len - m);

    std::vector<TokenId> tokens(pair.query);
    tokens.insert(tokens.end(), pair.response.begin(), pair.response.begin() + response_len);

    AssembledExample ex;
    ex.layout = {prompt_len, m, response_len};
    const std::size_t length = ex.layout.total();

    Tensor token_embeddings = lm.embed(tokens);
    if (prompt_len == 0) {
        ex.input_embeddings = token_embeddings;
    } else {
        Tensor query_embeddings = slice_rows(token_embeddings, 0, m);
        PromptMatrix prompt = build_prompt(regime, lm, pair.query, query_embeddings);
        const std::vector<Tensor> parts{prompt.vectors, token_embeddings};
        ex.input_embeddings = concat_rows(parts);
    }

    ex.positions = iota_ids(0, length);
    ex.target_ids.assign(length, 0);
    ex.loss_mask.assign(length, 0);
    // Position t predicts the token at t + 1. Token k (0-based) sits at prompt_len + k.
    for (std::size_t k = 1; k < tokens.size(); ++k) {
        const std::size_t t = prompt_len + k - 1;
        ex.target_ids[t] = tokens[k];
        ex.loss_mask[t] = k >= m ? 1 : 0;
    }
    return ex;
}

// --- parameters --------------------------------------------------------------

std::set<ParamGroup> trainable_groups(RegimeKind kind) {
    switch (kind) {
        case RegimeKind::FineTune:
            return {ParamGroup::WordEmbeddings, ParamGroup::PositionEmbeddings, ParamGroup::Body,
                    ParamGroup::Output};
        case RegimeKind::SoftPrompt:
            return {ParamGroup::PromptPool, ParamGroup::WordEmbeddings};
        case RegimeKind::DynamicPrompt:
            return {ParamGroup::Controller, ParamGroup::WordEmbeddings};
    }
    return {};
}

std::vector<NamedParameter> all_parameters(const AdaptationRegime& regime,
                                           const LanguageModel& lm) {
    auto params = lm.parameters();
    for (auto& p : regime.parameters()) params.push_back(std::move(p));
    return params;
}

std::vector<NamedParameter> trainable_parameters(const AdaptationRegime& regime,
                                                 const LanguageModel& lm) {
    const auto groups = trainable_groups(regime.kind);
    std::vector<NamedParameter> out;
    for (auto& p : all_parameters(regime, lm)) {
        if (groups.contains(p.group)) out.push_back(std::move(p));
    }
    return out;
}

void apply_freezing(const AdaptationRegime& regime, const LanguageModel& lm) {
    const auto groups = trainable_groups(regime.kind);
    for (auto& p : all_parameters(regime, lm)) p.tensor.set_requires_grad(groups.contains(p.group));
}

// --- losses ------------------------------------------------------------------

Tensor sequence_loss(const AdaptationRegime& regime, const LanguageModel& lm,
                     const DialogPair& pair) {
    AssembledExample ex = assemble_input(regime, lm, pair);
    Tensor logits = lm.forward(ex.input_embeddings, ex.positions);
    return masked_cross_entropy(logits, ex.target_ids, ex.loss_mask);
}

Tensor language_model_loss(const LanguageModel& lm, std::span<const TokenId> tokens) {
    if (tokens.size() < 2) throw EmptyInputError("language-model loss needs at least 2 tokens");
    const std::size_t length = std::min(tokens.size(), lm.config().max_positions);
    const auto input = tokens.first(length);
    std::vector<TokenId> targets(length, 0);
    std::vector<std::uint8_t> mask(length, 0);
    for (std::size_t t = 0; t + 1 < length; ++t) {
        targets[t] = input[t + 1];
        mask[t] = 1;
    }
    Tensor logits = lm.forward(lm.embed(input), iota_ids(0, length));
    return masked_cross_entropy(logits, targets, mask);
}

double perplexity(const LanguageModel& lm, std::span<const std::vector<TokenId>> sequences) {
    NoGradGuard no_grad;
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& seq : sequences) {
        if (seq.size() < 2) continue;
        const std::size_t predicted = std::min(seq.size(), lm.config().max_positions) - 1;
        total += language_model_loss(lm, seq).item() * static_cast<double>(predicted);
        count += predicted;
    }
    if (count == 0) throw EmptyInputError("perplexity over no predictable tokens");
    return std::exp(total / static_cast<double>(count));
}

}  // namespace promptlab
