#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "promptlab/adaptation.hpp"
#include "promptlab/corpus.hpp"
#include "promptlab/model.hpp"
#include "promptlab/tokenizer.hpp"

namespace promptlab {

struct MetricRow {
    double bleu1 = 0.0;
    double bleu2 = 0.0;
    double bleu3 = 0.0;
    double bleu4 = 0.0;
    double novelty = 0.0;
    double diversity = 0.0;

    bool operator==(const MetricRow&) const = default;
};

/// Whitespace-normalised training responses; membership means "seen in training".
using ResponseSet = std::unordered_set<std::string>;

ResponseSet training_response_set(std::span<const TextPair> train_pairs);

std::vector<std::string> whitespace_tokens(std::string_view text);

/// Corpus-level BLEU-n with uniform weights over k = 1..n.
///
/// Clipped k-gram counts are pooled over the whole batch. For k >= 2 a zero
/// numerator is smoothed to (0 + 1) / (den + 1). The brevity penalty is
/// exp(min(0, 1 - ref_len / hyp_len)); a batch with no hypothesis tokens scores 0.
double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
            int n);

/// Share of hypotheses whose normalised text is absent from `training_responses`.
double novelty(std::span<const std::string> hypotheses, const ResponseSet& training_responses);

/// Distinct normalised hypotheses over total hypotheses.
double diversity(std::span<const std::string> hypotheses);

MetricRow score(std::span<const std::string> hypotheses, std::span<const std::string> references,
                const ResponseSet& training_responses);

struct Evaluation {
    MetricRow row;
    std::vector<std::string> hypotheses;
};

/// Greedy-decodes every test query and scores the outputs against the references.
Evaluation evaluate(const AdaptationRegime& regime, const LanguageModel& lm,
                    const Tokenizer& tokenizer, std::span<const TextPair> test_pairs,
                    const ResponseSet& training_responses, std::size_t max_new_tokens);

}  // namespace promptlab
