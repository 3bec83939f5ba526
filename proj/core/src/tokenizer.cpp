#include "promptlab/tokenizer.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include <json.hpp>

#include "promptlab/errors.hpp"

namespace promptlab {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Words of normalised text; every word after the first keeps its leading space.
std::vector<std::string_view> split_words(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == ' ') {
            words.push_back(text.substr(start, i - start));
            start = i;
        }
    }
    return words;
}

using Pair = std::pair<TokenId, TokenId>;

void merge_in_place(std::vector<TokenId>& symbols, Pair pair, TokenId merged) {
    std::size_t out = 0;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (i + 1 < symbols.size() && symbols[i] == pair.first && symbols[i + 1] == pair.second) {
            symbols[out++] = merged;
            ++i;
        } else {
            symbols[out++] = symbols[i];
        }
    }
    symbols.resize(out);
}

}  // namespace

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

Tokenizer Tokenizer::train(std::span<const std::string> texts, std::size_t target_vocab) {
    if (target_vocab < static_cast<std::size_t>(kFirstMerge)) {
        throw ConfigError("tokenizer target vocabulary " + std::to_string(target_vocab) +
                          " is below the byte+special floor of " + std::to_string(kFirstMerge));
    }
    std::map<std::string, std::size_t> word_counts;
    for (const auto& text : texts) {
        const std::string norm = normalize_whitespace(text);
        for (auto word : split_words(norm)) {
            if (!word.empty()) ++word_counts[std::string(word)];
        }
    }

    std::vector<std::vector<TokenId>> words;
    std::vector<std::size_t> freqs;
    for (const auto& [word, count] : word_counts) {
        std::vector<TokenId> symbols;
        for (unsigned char c : word) symbols.push_back(c);
        words.push_back(std::move(symbols));
        freqs.push_back(count);
    }

    Tokenizer tok;
    tok.trained_ = true;
    while (static_cast<std::size_t>(kFirstMerge) + tok.merges_.size() < target_vocab) {
        std::map<Pair, std::size_t> pair_counts;
        for (std::size_t w = 0; w < words.size(); ++w) {
            const auto& s = words[w];
            for (std::size_t i = 0; i + 1 < s.size(); ++i) pair_counts[{s[i], s[i + 1]}] += freqs[w];
        }
        // std::map iterates pairs in ascending order, so the first maximum wins ties.
        Pair best{};
        std::size_t best_count = 0;
        for (const auto& [pair, count] : pair_counts) {
            if (count > best_count) {
                best = pair;
                best_count = count;
            }
        }
        if (best_count < 2) break;
        const auto merged = static_cast<TokenId>(kFirstMerge + tok.merges_.size());
        tok.merges_.push_back(best);
        for (auto& s : words) merge_in_place(s, best, merged);
    }
    tok.rebuild_tables();
    return tok;
}

std::size_t Tokenizer::vocab_size() const noexcept {
    return static_cast<std::size_t>(kFirstMerge) + merges_.size();
}

void Tokenizer::rebuild_tables() {
    pieces_.assign(vocab_size(), std::string());
    ranks_.clear();
    for (int b = 0; b < 256; ++b) pieces_[b] = std::string(1, static_cast<char>(b));
    for (std::size_t i = 0; i < merges_.size(); ++i) {
        const auto [a, b] = merges_[i];
        const auto limit = static_cast<TokenId>(kFirstMerge + i);
        if (a < 0 || b < 0 || a >= limit || b >= limit || a == kEos || a == kPad || b == kEos ||
            b == kPad) {
            throw FormatError("tokenizer merge " + std::to_string(i) + " references invalid ids");
        }
        pieces_[kFirstMerge + i] = pieces_[a] + pieces_[b];
        ranks_.emplace(merges_[i], i);
    }
}

void Tokenizer::encode_word(std::string_view word, std::vector<TokenId>& out) const {
    std::vector<TokenId> symbols;
    symbols.reserve(word.size());
    for (unsigned char c : word) symbols.push_back(c);
    // Ranks: merge i produced id kFirstMerge + i; lower rank merges first.
    while (symbols.size() > 1) {
        std::size_t best_rank = std::numeric_limits<std::size_t>::max();
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
            const auto it = ranks_.find({symbols[i], symbols[i + 1]});
            if (it != ranks_.end()) best_rank = std::min(best_rank, it->second);
        }
        if (best_rank == std::numeric_limits<std::size_t>::max()) break;
        merge_in_place(symbols, merges_[best_rank], static_cast<TokenId>(kFirstMerge + best_rank));
    }
    out.insert(out.end(), symbols.begin(), symbols.end());
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
    if (!trained_) throw StateError("tokenizer used before training");
    const std::string norm = normalize_whitespace(text);
    std::vector<TokenId> ids;
    for (auto word : split_words(norm)) {
        if (!word.empty()) encode_word(word, ids);
    }
    return ids;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
    if (!trained_) throw StateError("tokenizer used before training");
    std::string out;
    for (TokenId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size()) {
            throw VocabularyError("cannot decode token id " + std::to_string(id));
        }
        out += pieces_[id];
    }
    return out;
}

std::string Tokenizer::to_json() const {
    nlohmann::json j;
    j["format"] = "promptlab-bpe";
    j["version"] = 1;
    j["trained"] = trained_;
    j["merges"] = nlohmann::json::array();
    for (const auto& [a, b] : merges_) j["merges"].push_back({a, b});
    return j.dump();
}

Tokenizer Tokenizer::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("tokenizer json: ") + e.what());
    }
    if (j.value("format", "") != "promptlab-bpe" || j.value("version", 0) != 1) {
        throw FormatError("tokenizer json: unsupported format");
    }
    Tokenizer tok;
    tok.trained_ = j.value("trained", false);
    for (const auto& m : j.at("merges")) {
        tok.merges_.emplace_back(m.at(0).get<TokenId>(), m.at(1).get<TokenId>());
    }
    tok.rebuild_tables();
    return tok;
}

}  // namespace promptlab
