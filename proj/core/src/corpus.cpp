#include "promptlab/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "promptlab/errors.hpp"
#include "promptlab/seeding.hpp"

namespace promptlab {

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
    };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

}  // namespace

std::vector<Dialog> parse_dialogs(std::istream& in) {
    std::vector<Dialog> dialogs;
    std::string line;
    while (std::getline(in, line)) {
        Dialog dialog;
        std::string_view rest = line;
        while (true) {
            const auto pos = rest.find(kTurnSeparator);
            const auto turn = trim(rest.substr(0, pos));
            if (!turn.empty()) dialog.turns.emplace_back(turn);
            if (pos == std::string_view::npos) break;
            rest.remove_prefix(pos + kTurnSeparator.size());
        }
        if (dialog.turns.size() >= 2) dialogs.push_back(std::move(dialog));
    }
    return dialogs;
}

std::vector<Dialog> load_dialogs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read corpus file " + path.string());
    auto dialogs = parse_dialogs(in);
    if (in.bad()) throw IoError("error while reading " + path.string());
    if (dialogs.empty()) throw FormatError("no dialogs with two or more turns in " + path.string());
    return dialogs;
}

std::string format_dialog(const Dialog& dialog) {
    std::string line;
    for (const auto& turn : dialog.turns) {
        line += turn;
        line += ' ';
        line += kTurnSeparator;
        line += ' ';
    }
    if (!line.empty()) line.pop_back();
    return line;
}

void write_dialogs(const std::filesystem::path& path, std::span<const Dialog> dialogs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& d : dialogs) out << format_dialog(d) << '\n';
    if (!out) throw IoError("error while writing " + path.string());
}

std::vector<TextPair> make_pairs(const Dialog& dialog) {
    std::vector<TextPair> pairs;
    for (std::size_t i = 0; i + 1 < dialog.turns.size(); i += 2) {
        pairs.push_back({dialog.turns[i], dialog.turns[i + 1]});
    }
    return pairs;
}

std::vector<TextPair> make_pairs(std::span<const Dialog> dialogs) {
    std::vector<TextPair> pairs;
    for (const auto& d : dialogs) {
        auto p = make_pairs(d);
        pairs.insert(pairs.end(), std::make_move_iterator(p.begin()),
                     std::make_move_iterator(p.end()));
    }
    return pairs;
}

std::vector<TextPair> subsample(std::span<const TextPair> pairs, double fraction,
                                std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("data fraction " + std::to_string(fraction) + " outside (0, 1]");
    }
    if (fraction == 1.0) return {pairs.begin(), pairs.end()};
    const auto keep =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pairs.size())));
    if (keep == 0) {
        throw ConfigError("data fraction " + std::to_string(fraction) + " of " +
                          std::to_string(pairs.size()) + " pairs selects nothing");
    }
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates with an explicit generator so the draw is platform-stable.
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t span_size = order.size() - i;
        const std::size_t j = i + static_cast<std::size_t>(rng() % span_size);
        std::swap(order[i], order[j]);
    }
    order.resize(keep);
    std::sort(order.begin(), order.end());
    std::vector<TextPair> out;
    out.reserve(keep);
    for (std::size_t idx : order) out.push_back(pairs[idx]);
    return out;
}

CorpusSplit load_corpus(const std::filesystem::path& train, const std::filesystem::path& validation,
                        const std::filesystem::path& test) {
    CorpusSplit split;
    split.train = make_pairs(load_dialogs(train));
    split.validation = make_pairs(load_dialogs(validation));
    split.test = make_pairs(load_dialogs(test));
    return split;
}

CorpusSplit with_fraction(const CorpusSplit& full, double fraction, std::uint64_t seed) {
    CorpusSplit split;
    split.train = subsample(full.train, fraction, seed);
    split.validation = full.validation;
    split.test = full.test;
    split.fraction = fraction;
    return split;
}

Tokenizer train_tokenizer(std::span<const TextPair> train_pairs, std::size_t target_vocab) {
    std::vector<std::string> texts;
    texts.reserve(train_pairs.size() * 2);
    for (const auto& p : train_pairs) {
        texts.push_back(p.query);
        texts.push_back(p.response);
    }
    return Tokenizer::train(texts, target_vocab);
}

DialogPair encode_pair(const Tokenizer& tokenizer, const TextPair& pair) {
    DialogPair out;
    out.query = tokenizer.encode(pair.query);
    out.response = tokenizer.encode(pair.response);
    out.response.push_back(Tokenizer::kEos);
    return out;
}

std::vector<DialogPair> encode_pairs(const Tokenizer& tokenizer, std::span<const TextPair> pairs) {
    std::vector<DialogPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        DialogPair encoded = encode_pair(tokenizer, p);
        // Degenerate pairs never reach assembly.
        if (encoded.query.empty() || encoded.response.size() < 2) continue;
        out.push_back(std::move(encoded));
    }
    return out;
}

std::vector<std::vector<TokenId>> encode_utterances(const Tokenizer& tokenizer,
                                                    std::span<const TextPair> pairs) {
    std::vector<std::vector<TokenId>> out;
    for (const auto& p : pairs) {
        for (const std::string* text : {&p.query, &p.response}) {
            auto ids = tokenizer.encode(*text);
            if (ids.empty()) continue;
            ids.push_back(Tokenizer::kEos);
            out.push_back(std::move(ids));
        }
    }
    return out;
}

// --- synthetic corpus ----------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 16> kNames{
    "anna", "ben", "carl", "dora", "eva", "finn", "gina", "hugo",
    "ivy",  "jack", "kate", "liam", "mia", "noah", "olga", "paul"};
constexpr std::array<std::string_view, 12> kObjects{
    "cup", "book", "key", "hat", "pen", "bag", "lamp", "coat", "ring", "map", "shoe", "box"};
constexpr std::array<std::string_view, 8> kPlaces{
    "kitchen", "garden", "office", "car", "hall", "attic", "cellar", "bedroom"};
constexpr std::array<std::string_view, 6> kColors{"red", "blue", "green", "black", "white",
                                                  "yellow"};
constexpr std::array<std::string_view, 4> kMoods{"fine", "tired", "happy", "busy"};

std::string join(std::initializer_list<std::string_view> words) {
    std::string out;
    for (auto w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

TextPair synthetic_exchange(std::mt19937_64& rng) {
    const std::size_t name = rng() % kNames.size();
    const std::size_t object = rng() % kObjects.size();
    const auto n = kNames[name];
    const auto o = kObjects[object];
    switch (rng() % 3) {
        case 0:
            return {join({"where", "is", "the", o, "of", n, "?"}),
                    join({n, "keeps", "the", o, "in", "the", kPlaces[object % kPlaces.size()],
                          "."})};
        case 1:
            return {join({"what", "color", "is", "the", o, "of", n, "?"}),
                    join({"the", o, "of", n, "is", kColors[name % kColors.size()], "."})};
        default:
            return {join({"hello", n, ",", "how", "are", "you", "?"}),
                    join({"i", "am", kMoods[name % kMoods.size()], ",", "thank", "you", "."})};
    }
}

}  // namespace

std::vector<Dialog> synthetic_dialogs(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, "synthetic-corpus"));
    std::vector<Dialog> dialogs;
    dialogs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Dialog d;
        const std::size_t exchanges = 1 + rng() % 2;
        for (std::size_t e = 0; e < exchanges; ++e) {
            auto [q, r] = synthetic_exchange(rng);
            d.turns.push_back(std::move(q));
            d.turns.push_back(std::move(r));
        }
        if (rng() % 4 == 0) d.turns.push_back(synthetic_exchange(rng).query);
        dialogs.push_back(std::move(d));
    }
    return dialogs;
}

}  // namespace promptlab
