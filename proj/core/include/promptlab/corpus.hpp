#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "promptlab/adaptation.hpp"
#include "promptlab/tokenizer.hpp"

namespace promptlab {

/// Turn separator of the line-per-dialog corpus format.
inline constexpr std::string_view kTurnSeparator = "__eou__";

struct Dialog {
    std::vector<std::string> turns;

    bool operator==(const Dialog&) const = default;
};

struct TextPair {
    std::string query;
    std::string response;

    bool operator==(const TextPair&) const = default;
};

/// One dialog per line, turns separated by `__eou__`. Turns are trimmed,
/// empty turns dropped, and dialogs left with fewer than two turns skipped.
std::vector<Dialog> parse_dialogs(std::istream& in);
/// Throws IoError if unreadable, FormatError if no dialog survives.
std::vector<Dialog> load_dialogs(const std::filesystem::path& path);

std::string format_dialog(const Dialog& dialog);
void write_dialogs(const std::filesystem::path& path, std::span<const Dialog> dialogs);

/// Disjoint consecutive pairs (t1,t2), (t3,t4), ...; a trailing odd turn is dropped.
std::vector<TextPair> make_pairs(const Dialog& dialog);
std::vector<TextPair> make_pairs(std::span<const Dialog> dialogs);

/// round(fraction * n) pairs drawn without replacement, kept in original
/// order. fraction == 1 returns the input unchanged.
std::vector<TextPair> subsample(std::span<const TextPair> pairs, double fraction,
                                std::uint64_t seed);

struct CorpusSplit {
    std::vector<TextPair> train;
    std::vector<TextPair> validation;
    std::vector<TextPair> test;
    double fraction = 1.0;
};

CorpusSplit load_corpus(const std::filesystem::path& train, const std::filesystem::path& validation,
                        const std::filesystem::path& test);

/// Subsamples the training split only; validation and test stay full-sized.
CorpusSplit with_fraction(const CorpusSplit& full, double fraction, std::uint64_t seed);

/// Tokenizer over queries and responses of the training pairs only.
Tokenizer train_tokenizer(std::span<const TextPair> train_pairs, std::size_t target_vocab);

/// Query ids, and response ids followed by EOS.
DialogPair encode_pair(const Tokenizer& tokenizer, const TextPair& pair);
std::vector<DialogPair> encode_pairs(const Tokenizer& tokenizer, std::span<const TextPair> pairs);

/// Training utterances (queries and responses) encoded with a trailing EOS,
/// used by language-model pre-training.
std::vector<std::vector<TokenId>> encode_utterances(const Tokenizer& tokenizer,
                                                    std::span<const TextPair> pairs);

/// Synthetic dialogs with a deterministic query -> response mapping. Each
/// dialog holds one or two query/response exchanges, sometimes followed by
/// an unanswered trailing turn.
std::vector<Dialog> synthetic_dialogs(std::size_t count, std::uint64_t seed);

}  // namespace promptlab
