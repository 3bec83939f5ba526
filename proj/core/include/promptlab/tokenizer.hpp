#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "promptlab/tensor.hpp"

namespace promptlab {

/// Collapses every run of ASCII whitespace to one space and strips both ends.
std::string normalize_whitespace(std::string_view text);

/// Byte-level BPE. Ids 0..255 are raw bytes, so every input is encodable;
/// 256/257 are EOS/PAD; learned merges follow from 258.
///
/// Text is whitespace-normalised, then split into words where each word after
/// the first carries its leading space. Merges never cross word boundaries.
class Tokenizer {
public:
    static constexpr TokenId kEos = 256;
    static constexpr TokenId kPad = 257;
    static constexpr TokenId kFirstMerge = 258;

    Tokenizer() = default;

    /// Learns merges greedily (most frequent adjacent pair, ties to the
    /// smallest pair) until `target_vocab` ids exist or no pair repeats.
    static Tokenizer train(std::span<const std::string> texts, std::size_t target_vocab);

    bool trained() const noexcept { return trained_; }
    std::size_t vocab_size() const noexcept;
    const std::vector<std::pair<TokenId, TokenId>>& merges() const noexcept { return merges_; }

    std::vector<TokenId> encode(std::string_view text) const;
    /// Specials are dropped from the output.
    std::string decode(std::span<const TokenId> ids) const;

    std::string to_json() const;
    static Tokenizer from_json(std::string_view json);

    bool operator==(const Tokenizer& other) const {
        return trained_ == other.trained_ && merges_ == other.merges_;
    }

private:
    void rebuild_tables();
    void encode_word(std::string_view word, std::vector<TokenId>& out) const;

    bool trained_ = false;
    std::vector<std::pair<TokenId, TokenId>> merges_;
    std::vector<std::string> pieces_;  // id -> bytes
    std::map<std::pair<TokenId, TokenId>, std::size_t> ranks_;
};

}  // namespace promptlab
