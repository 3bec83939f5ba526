#pragma once

// The three adaptation regimes: what is prepended to the input, which
// parameter groups train, and the response-only sequence loss.

#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "promptlab/model.hpp"
#include "promptlab/tensor.hpp"

namespace promptlab {

enum class RegimeKind { FineTune, SoftPrompt, DynamicPrompt };

std::string_view to_string(RegimeKind kind);
/// Accepts "fine_tune", "soft_prompt", "dynamic_prompt".
RegimeKind parse_regime_kind(std::string_view name);

/// Query tokens x_1..x_m followed by response tokens x_{m+1}..x_N.
struct DialogPair {
    std::vector<TokenId> query;
    std::vector<TokenId> response;

    std::size_t query_length() const noexcept { return query.size(); }
    std::size_t total_length() const noexcept { return query.size() + response.size(); }

    /// Throws EmptyInputError / VocabularyError when the pair is unusable.
    void validate(std::size_t vocab_size) const;
};

/// Soft-prompt rows appended after the vocabulary. A length-m query uses rows 0..m-1.
class PromptPool {
public:
    PromptPool(std::size_t capacity, std::size_t d_model, std::uint64_t seed);

    std::size_t capacity() const { return embeddings_.rows(); }
    const Tensor& embeddings() const noexcept { return embeddings_; }

    std::vector<NamedParameter> parameters() const;
    PromptPool clone() const;

private:
    Tensor embeddings_;
};

struct AdaptationRegime {
    RegimeKind kind = RegimeKind::FineTune;
    std::optional<PromptPool> prompt_pool;
    std::optional<Controller> controller;

    /// Fresh regime state for `kind`: a pool of `pool_capacity` rows for
    /// SOFT_PROMPT, a controller for DYNAMIC_PROMPT, nothing for FINE_TUNE.
    static AdaptationRegime create(RegimeKind kind, const ModelConfig& config,
                                   std::size_t pool_capacity, std::uint64_t seed);

    void validate() const;
    std::vector<NamedParameter> parameters() const;
    AdaptationRegime clone() const;
};

struct SequenceLayout {
    std::size_t prompt_len = 0;
    std::size_t query_len = 0;
    std::size_t response_len = 0;

    std::size_t total() const noexcept { return prompt_len + query_len + response_len; }
};

/// Concrete model input for one pair. `target_ids[t]` is the token that
/// position t predicts where one exists; `loss_mask` selects exactly the
/// positions that predict response tokens.
struct AssembledExample {
    Tensor input_embeddings;
    std::vector<std::uint8_t> loss_mask;
    std::vector<TokenId> target_ids;
    std::vector<TokenId> positions;
    SequenceLayout layout;
};

std::size_t prompt_length(RegimeKind kind, std::size_t query_length);

/// Prompt vectors for a query: pool rows for SOFT_PROMPT, controller output
/// for DYNAMIC_PROMPT. Undefined tensor for FINE_TUNE.
PromptMatrix build_prompt(const AdaptationRegime& regime, const LanguageModel& lm,
                          std::span<const TokenId> query, const Tensor& query_embeddings);

/// prompt ⊕ embed(query), the conditioning prefix used for decoding.
Tensor assemble_prefix(const AdaptationRegime& regime, const LanguageModel& lm,
                       std::span<const TokenId> query);

/// prompt ⊕ embed(query) ⊕ embed(response). Responses that overflow
/// max_positions are right-truncated; the query never is.
AssembledExample assemble_input(const AdaptationRegime& regime, const LanguageModel& lm,
                                const DialogPair& pair);

std::set<ParamGroup> trainable_groups(RegimeKind kind);

/// Every parameter of the LM plus the regime's own state.
std::vector<NamedParameter> all_parameters(const AdaptationRegime& regime,
                                           const LanguageModel& lm);
std::vector<NamedParameter> trainable_parameters(const AdaptationRegime& regime,
                                                 const LanguageModel& lm);

/// Sets requires_grad on every parameter according to the regime's trainable groups.
void apply_freezing(const AdaptationRegime& regime, const LanguageModel& lm);

/// Mean negative log-likelihood of the response tokens only.
Tensor sequence_loss(const AdaptationRegime& regime, const LanguageModel& lm,
                     const DialogPair& pair);

/// Plain next-token loss over every position of `tokens` (pre-training objective).
Tensor language_model_loss(const LanguageModel& lm, std::span<const TokenId> tokens);

/// exp(mean per-token NLL) over a set of sequences, under no-grad.
double perplexity(const LanguageModel& lm, std::span<const std::vector<TokenId>> sequences);

}  // namespace promptlab
