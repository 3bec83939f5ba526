#include "promptlab/metrics.hpp"

#include <cmath>
#include <map>

#include "promptlab/errors.hpp"
#include "promptlab/trainer.hpp"

namespace promptlab {

namespace {

using NGram = std::vector<std::string_view>;

std::map<NGram, std::size_t> ngram_counts(const std::vector<std::string>& tokens, std::size_t k) {
    std::map<NGram, std::size_t> counts;
    for (std::size_t i = 0; i + k <= tokens.size(); ++i) {
        ++counts[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                       tokens.begin() + static_cast<std::ptrdiff_t>(i + k))];
    }
    return counts;
}

void require_batch(std::span<const std::string> hypotheses) {
    if (hypotheses.empty()) throw EmptyInputError("metric over an empty hypothesis set");
}

}  // namespace

ResponseSet training_response_set(std::span<const TextPair> train_pairs) {
    ResponseSet out;
    for (const auto& p : train_pairs) out.insert(normalize_whitespace(p.response));
    return out;
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    const std::string norm = normalize_whitespace(text);
    std::size_t start = 0;
    while (start < norm.size()) {
        std::size_t end = norm.find(' ', start);
        if (end == std::string::npos) end = norm.size();
        tokens.push_back(norm.substr(start, end - start));
        start = end + 1;
    }
    return tokens;
}

double bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
            int n) {
    require_batch(hypotheses);
    if (hypotheses.size() != references.size()) {
        throw DimensionError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                             std::to_string(references.size()) + " references");
    }
    if (n < 1 || n > 4) throw ConfigError("bleu order must be in 1..4, got " + std::to_string(n));

    std::vector<double> matched(static_cast<std::size_t>(n), 0.0);
    std::vector<double> total(static_cast<std::size_t>(n), 0.0);
    double hyp_len = 0.0, ref_len = 0.0;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const auto hyp = whitespace_tokens(hypotheses[s]);
        const auto ref = whitespace_tokens(references[s]);
        hyp_len += static_cast<double>(hyp.size());
        ref_len += static_cast<double>(ref.size());
        for (int k = 1; k <= n; ++k) {
            const auto hyp_counts = ngram_counts(hyp, static_cast<std::size_t>(k));
            const auto ref_counts = ngram_counts(ref, static_cast<std::size_t>(k));
            for (const auto& [gram, count] : hyp_counts) {
                const auto it = ref_counts.find(gram);
                const std::size_t clip = it == ref_counts.end() ? 0 : std::min(count, it->second);
                matched[k - 1] += static_cast<double>(clip);
                total[k - 1] += static_cast<double>(count);
            }
        }
    }
    if (hyp_len == 0.0) return 0.0;

    double log_sum = 0.0;
    for (int k = 1; k <= n; ++k) {
        double num = matched[k - 1];
        double den = total[k - 1];
        if (k >= 2 && num == 0.0) {
            num += 1.0;
            den += 1.0;
        }
        if (num == 0.0) return 0.0;
        log_sum += std::log(num / den);
    }
    const double brevity = std::exp(std::min(0.0, 1.0 - ref_len / hyp_len));
    return brevity * std::exp(log_sum / static_cast<double>(n));
}

double novelty(std::span<const std::string> hypotheses, const ResponseSet& training_responses) {
    require_batch(hypotheses);
    std::size_t unseen = 0;
    for (const auto& h : hypotheses) {
        if (!training_responses.contains(normalize_whitespace(h))) ++unseen;
    }
    return static_cast<double>(unseen) / static_cast<double>(hypotheses.size());
}

double diversity(std::span<const std::string> hypotheses) {
    require_batch(hypotheses);
    std::unordered_set<std::string> unique;
    for (const auto& h : hypotheses) unique.insert(normalize_whitespace(h));
    return static_cast<double>(unique.size()) / static_cast<double>(hypotheses.size());
}

MetricRow score(std::span<const std::string> hypotheses, std::span<const std::string> references,
                const ResponseSet& training_responses) {
    MetricRow row;
    row.bleu1 = bleu(hypotheses, references, 1);
    row.bleu2 = bleu(hypotheses, references, 2);
    row.bleu3 = bleu(hypotheses, references, 3);
    row.bleu4 = bleu(hypotheses, references, 4);
    row.novelty = novelty(hypotheses, training_responses);
    row.diversity = diversity(hypotheses);
    return row;
}

Evaluation evaluate(const AdaptationRegime& regime, const LanguageModel& lm,
                    const Tokenizer& tokenizer, std::span<const TextPair> test_pairs,
                    const ResponseSet& training_responses, std::size_t max_new_tokens) {
    Evaluation out;
    std::vector<std::string> references;
    for (const auto& pair : test_pairs) {
        const auto query = tokenizer.encode(pair.query);
        const auto response = greedy_decode(regime, lm, query, max_new_tokens);
        out.hypotheses.push_back(tokenizer.decode(response));
        references.push_back(normalize_whitespace(pair.response));
    }
    out.row = score(out.hypotheses, references, training_responses);
    return out;
}

}  // namespace promptlab
