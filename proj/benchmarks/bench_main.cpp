#include <benchmark/benchmark.h>

#include <random>

#include "promptlab/adaptation.hpp"
#include "promptlab/corpus.hpp"
#include "promptlab/metrics.hpp"
#include "promptlab/model.hpp"
#include "promptlab/trainer.hpp"

using namespace promptlab;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = dist(rng);
    return Tensor::from({rows, cols}, std::move(values));
}

ModelConfig bench_config() {
    ModelConfig c;
    c.vocab_size = 400;
    c.d_model = 32;
    c.n_layers = 2;
    c.n_heads = 4;
    c.d_ff = 64;
    c.max_positions = 64;
    c.controller_layers = 1;
    c.controller_heads = 4;
    c.seed = 1;
    return c;
}

DialogPair bench_pair(std::size_t m, std::size_t n, std::size_t vocab) {
    DialogPair p;
    for (std::size_t i = 0; i < m; ++i) p.query.push_back(static_cast<TokenId>((i * 7 + 3) % vocab));
    for (std::size_t i = 0; i < n; ++i) p.response.push_back(static_cast<TokenId>((i * 11 + 5) % vocab));
    return p;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

static void BM_SequenceLossForwardBackward(benchmark::State& state) {
    const auto kind = static_cast<RegimeKind>(state.range(0));
    const auto config = bench_config();
    LanguageModel lm(config);
    const auto regime = AdaptationRegime::create(kind, config, 32, 2);
    apply_freezing(regime, lm);
    const auto pair = bench_pair(10, 12, config.vocab_size);
    for (auto _ : state) {
        auto loss = sequence_loss(regime, lm, pair);
        loss.backward();
        for (const auto& p : all_parameters(regime, lm)) {
            Tensor t = p.tensor;
            t.zero_grad();
        }
    }
    state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_SequenceLossForwardBackward)->DenseRange(0, 2);

static void BM_GreedyDecode(benchmark::State& state) {
    const auto config = bench_config();
    LanguageModel lm(config);
    const auto regime = AdaptationRegime::create(RegimeKind::DynamicPrompt, config, 32, 2);
    const auto pair = bench_pair(10, 0, config.vocab_size);
    for (auto _ : state) benchmark::DoNotOptimize(greedy_decode(regime, lm, pair.query, 20, 9999));
}
BENCHMARK(BM_GreedyDecode);

static void BM_Bleu(benchmark::State& state) {
    const auto dialogs = synthetic_dialogs(static_cast<std::size_t>(state.range(0)), 3);
    std::vector<std::string> hyps, refs;
    for (const auto& p : make_pairs(dialogs)) {
        hyps.push_back(p.query);
        refs.push_back(p.response);
    }
    for (auto _ : state) benchmark::DoNotOptimize(bleu(hyps, refs, 4));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(hyps.size()));
}
BENCHMARK(BM_Bleu)->Arg(100)->Arg(1000);

static void BM_TokenizerEncode(benchmark::State& state) {
    const auto pairs = make_pairs(synthetic_dialogs(300, 4));
    const auto tokenizer = train_tokenizer(pairs, 400);
    std::size_t bytes = 0;
    for (const auto& p : pairs) bytes += p.query.size();
    for (auto _ : state) {
        for (const auto& p : pairs) benchmark::DoNotOptimize(tokenizer.encode(p.query));
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_TokenizerEncode);

static void BM_TokenizerTrain(benchmark::State& state) {
    const auto pairs = make_pairs(synthetic_dialogs(300, 4));
    for (auto _ : state) benchmark::DoNotOptimize(train_tokenizer(pairs, 400));
}
BENCHMARK(BM_TokenizerTrain)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
