#include "fixtures.hpp"

#include <random>

namespace promptlab::testing {

ModelConfig tiny_config(std::size_t vocab, std::uint64_t seed) {
    ModelConfig c;
    c.vocab_size = vocab;
    c.d_model = 16;
    c.n_layers = 2;
    c.n_heads = 2;
    c.d_ff = 32;
    c.max_positions = 64;
    c.controller_layers = 1;
    c.controller_heads = 2;
    c.seed = seed;
    return c;
}

DialogPair make_pair(std::size_t m, std::size_t response_len, std::size_t vocab,
                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DialogPair pair;
    for (std::size_t i = 0; i < m; ++i) pair.query.push_back(static_cast<TokenId>(rng() % vocab));
    for (std::size_t i = 0; i < response_len; ++i) {
        pair.response.push_back(static_cast<TokenId>(rng() % vocab));
    }
    return pair;
}

ModelState make_state(RegimeKind kind, const ModelConfig& config, std::size_t pool,
                      std::uint64_t seed) {
    return ModelState{LanguageModel(config), AdaptationRegime::create(kind, config, pool, seed)};
}

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("promptlab-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

ExperimentConfig small_experiment(const std::filesystem::path& dir, std::size_t dialogs,
                                  std::uint64_t seed) {
    write_synthetic_corpus(dir / "corpus", dialogs, seed);
    ExperimentConfig c;
    c.train_path = dir / "corpus" / "train.txt";
    c.validation_path = dir / "corpus" / "valid.txt";
    c.test_path = dir / "corpus" / "test.txt";
    c.output_dir = dir / "out";
    c.tokenizer_vocab = 320;
    c.model.d_model = 16;
    c.model.n_layers = 1;
    c.model.n_heads = 2;
    c.model.d_ff = 32;
    c.model.max_positions = 48;
    c.model.controller_layers = 1;
    c.model.controller_heads = 2;
    c.pretrain.steps = 20;
    c.pretrain.batch_size = 4;
    c.pretrain.learning_rate = 3e-3;
    c.train.batch_size = 8;
    c.train.max_epochs = 1;
    c.train.patience_epochs = 1;
    c.train.max_new_tokens = 12;
    c.sweep.trials = 1;
    c.sweep.lr_low = 1e-3;
    c.sweep.lr_high = 1e-2;
    c.prompt_pool_capacity = 24;
    c.seed = seed;
    return c;
}

}  // namespace promptlab::testing
