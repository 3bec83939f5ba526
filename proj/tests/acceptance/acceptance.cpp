// Acceptance suite. One line per criterion; exit status is nonzero when a
// gated criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "promptlab/errors.hpp"
#include "promptlab/experiment.hpp"
#include "promptlab/metrics.hpp"
#include "promptlab/optimizer.hpp"
#include "promptlab/seeding.hpp"

using namespace promptlab;
using namespace promptlab::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, value);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void fail(Outcome& o, const std::string& why) {
    o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + why;
}

std::vector<NamedParameter> group_params(const ModelState& s, ParamGroup g) {
    std::vector<NamedParameter> out;
    for (const auto& p : all_parameters(s.regime, s.lm)) {
        if (p.group == g) out.push_back(p);
    }
    return out;
}

std::vector<double> flat_values(std::span<const NamedParameter> params) {
    std::vector<double> out;
    for (const auto& p : params) out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
    return out;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// 1 ---------------------------------------------------------------------------

Outcome gradient_suite() {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    std::size_t checked = 0;
    double worst = 0.0;
    std::string worst_name;
    for (auto kind : {RegimeKind::FineTune, RegimeKind::SoftPrompt, RegimeKind::DynamicPrompt}) {
        auto config = tiny_config(24, 21);
        config.max_positions = 16;
        auto state = make_state(kind, config, 8, 22);
        const auto params = all_parameters(state.regime, state.lm);
        std::mt19937_64 rng(23);
        randomize(params, rng, 0.3);
        for (const auto& p : params) {
            if (p.name.find("gain") != std::string::npos) {
                Tensor t = p.tensor;
                for (auto& v : t.mutable_values()) v += 1.0;
            }
        }
        const auto pair = make_pair(4, 5, 24, 24);
        const auto report =
            check_gradients([&] { return sequence_loss(state.regime, state.lm, pair); }, params);
        checked += report.checked;
        if (report.max_relative_error > worst) {
            worst = report.max_relative_error;
            worst_name = std::string(to_string(kind)) + ":" + report.worst_parameter + "[" +
                         std::to_string(report.worst_index) + "]";
        }
    }
    const double elapsed = seconds_since(start);
    o.detail = "max relative error " + fmt("%.2e", worst) + " at " + worst_name + " over " +
               std::to_string(checked) + " entries, " + fmt("%.1f", elapsed) + " s";
    if (!(worst < 1e-4)) fail(o, "relative error above 1e-4");
    if (elapsed > 120.0) fail(o, "slower than 2 minutes");
    return o;
}

// 2 ---------------------------------------------------------------------------

Outcome freezing_suite() {
    Outcome o;
    const std::vector<ParamGroup> groups{ParamGroup::WordEmbeddings, ParamGroup::PositionEmbeddings,
                                         ParamGroup::Body,           ParamGroup::Output,
                                         ParamGroup::PromptPool,     ParamGroup::Controller};
    for (auto kind : {RegimeKind::SoftPrompt, RegimeKind::DynamicPrompt}) {
        auto state = make_state(kind, tiny_config(24, 31), 16, 32);
        std::map<ParamGroup, std::vector<double>> before;
        for (auto g : groups) before[g] = flat_values(group_params(state, g));

        apply_freezing(state.regime, state.lm);
        Adam adam(trainable_parameters(state.regime, state.lm), AdamConfig{.learning_rate = 1e-2});
        std::vector<DialogPair> pairs;
        for (std::uint64_t i = 0; i < 8; ++i) pairs.push_back(make_pair(2 + i % 5, 3 + i % 4, 24, 100 + i));
        for (std::size_t step = 0; step < 50; ++step) {
            adam.zero_grad();
            Tensor total = Tensor::scalar(0.0);
            for (std::size_t b = 0; b < 4; ++b) {
                total = add(total, sequence_loss(state.regime, state.lm, pairs[(step * 4 + b) % 8]));
            }
            scale(total, 0.25).backward();
            adam.step();
        }

        const auto trainable = trainable_groups(kind);
        for (auto g : groups) {
            const auto after = flat_values(group_params(state, g));
            if (after.empty()) continue;
            const bool same = bit_equal(before[g], after);
            const bool should_change = trainable.contains(g);
            if (should_change == same) {
                fail(o, std::string(to_string(kind)) + " " + std::string(to_string(g)) +
                            (same ? " did not change" : " changed"));
            }
        }
        const bool has_own = kind == RegimeKind::SoftPrompt ? !group_params(state, ParamGroup::PromptPool).empty()
                                                            : !group_params(state, ParamGroup::Controller).empty();
        if (!has_own) fail(o, std::string(to_string(kind)) + " has no regime parameters");
    }
    if (o.pass) o.detail = "50 Adam steps per regime; frozen groups bit-identical, trainable groups moved";
    return o;
}

// 3 ---------------------------------------------------------------------------

Outcome loss_mask_suite() {
    Outcome o;
    std::mt19937_64 rng(41);
    std::normal_distribution<double> noise(0.0, 50.0);
    std::size_t trials = 0, randomized_rows = 0;
    for (auto kind : {RegimeKind::FineTune, RegimeKind::SoftPrompt, RegimeKind::DynamicPrompt}) {
        auto state = make_state(kind, tiny_config(24, 42), 16, 43);
        for (std::uint64_t t = 0; t < 20; ++t) {
            const auto pair = make_pair(1 + t % 7, 1 + t % 5, 24, 500 + t);
            const double reference = sequence_loss(state.regime, state.lm, pair).item();
            const auto ex = assemble_input(state.regime, state.lm, pair);
            const Tensor logits = state.lm.forward(ex.input_embeddings, ex.positions);
            const double recomputed = masked_cross_entropy(logits, ex.target_ids, ex.loss_mask).item();
            if (recomputed != reference) fail(o, "masked loss does not reproduce sequence_loss");

            const std::size_t prefix = ex.layout.prompt_len + ex.layout.query_len;
            const std::size_t total = ex.layout.total();
            for (std::size_t t2 = 0; t2 < ex.loss_mask.size(); ++t2) {
                const bool predicts_response = t2 + 1 >= prefix && t2 + 1 < total;
                if (predicts_response != static_cast<bool>(ex.loss_mask[t2])) {
                    fail(o, "mask misplaced at position " + std::to_string(t2));
                    break;
                }
            }

            Tensor perturbed = logits.clone();
            const std::size_t vocab = logits.cols();
            auto targets = ex.target_ids;
            for (std::size_t r = 0; r < ex.loss_mask.size(); ++r) {
                if (ex.loss_mask[r]) continue;
                ++randomized_rows;
                for (std::size_t c = 0; c < vocab; ++c) perturbed.mutable_values()[r * vocab + c] = noise(rng);
                targets[r] = static_cast<TokenId>(rng() % vocab);
            }
            const double after = masked_cross_entropy(perturbed, targets, ex.loss_mask).item();
            if (after - reference != 0.0) {
                fail(o, "loss moved by " + fmt("%.3e", after - reference));
            }
            ++trials;
        }
    }
    if (o.pass) {
        o.detail = std::to_string(trials) + " pairs, " + std::to_string(randomized_rows) +
                   " masked-out rows randomized, loss change exactly 0";
    }
    return o;
}

// 4 ---------------------------------------------------------------------------

std::vector<std::string> all_sentences(std::size_t max_len) {
    std::vector<std::string> out{""};
    std::vector<std::string> frontier{""};
    for (std::size_t len = 1; len <= max_len; ++len) {
        std::vector<std::string> next;
        for (const auto& s : frontier) {
            for (const char* w : {"a", "b", "c"}) next.push_back(s.empty() ? w : s + " " + w);
        }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

Outcome metric_oracle_suite() {
    Outcome o;
    using S = std::vector<std::string>;
    struct Hand {
        S hyp, ref;
        int n;
        double expected;
    };
    const std::vector<Hand> hand{
        {{"a b c d"}, {"a b c d"}, 4, 1.0},
        {{"a b c"}, {"a b d"}, 1, 2.0 / 3.0},
        {{"the the the the"}, {"the cat"}, 1, 0.25},
        {{"a b c"}, {"a b d"}, 2, std::sqrt(1.0 / 3.0)},
        {{"a b"}, {"a b c d"}, 1, std::exp(-1.0)},
        {{"a b"}, {"b a"}, 2, std::sqrt(0.5)},
        {{"a b", "c"}, {"a c", "c"}, 1, 2.0 / 3.0},
        {{"x y"}, {"a b"}, 1, 0.0},
    };
    double worst_hand = 0.0;
    for (const auto& h : hand) worst_hand = std::max(worst_hand, std::abs(bleu(h.hyp, h.ref, h.n) - h.expected));
    if (!(worst_hand < 1e-9)) fail(o, "hand case off by " + fmt("%.2e", worst_hand));

    // Every single-pair batch over {a,b,c} up to length 4, every two-pair
    // batch up to length 2, plus random batches of up to five sentences.
    std::size_t compared = 0;
    double worst_brute = 0.0;
    const auto up_to_4 = all_sentences(4);
    for (const auto& h : up_to_4) {
        for (const auto& r : up_to_4) {
            for (int n = 1; n <= 4; ++n) {
                worst_brute = std::max(worst_brute, std::abs(bleu(S{h}, S{r}, n) - brute_bleu({h}, {r}, n)));
                ++compared;
            }
        }
    }
    const auto up_to_2 = all_sentences(2);
    for (const auto& h1 : up_to_2)
        for (const auto& h2 : up_to_2)
            for (const auto& r1 : up_to_2)
                for (const auto& r2 : up_to_2)
                    for (int n = 1; n <= 2; ++n) {
                        const S h{h1, h2}, r{r1, r2};
                        worst_brute = std::max(worst_brute, std::abs(bleu(h, r, n) - brute_bleu(h, r, n)));
                        ++compared;
                    }
    std::mt19937_64 rng(51);
    const auto up_to_6 = all_sentences(6);
    for (int trial = 0; trial < 20000; ++trial) {
        const std::size_t size = 1 + rng() % 5;
        S h, r;
        for (std::size_t i = 0; i < size; ++i) {
            h.push_back(up_to_6[rng() % up_to_6.size()]);
            r.push_back(up_to_6[rng() % up_to_6.size()]);
        }
        const int n = 1 + static_cast<int>(rng() % 4);
        worst_brute = std::max(worst_brute, std::abs(bleu(h, r, n) - brute_bleu(h, r, n)));
        ++compared;
    }
    if (!(worst_brute < 1e-9)) fail(o, "brute-force BLEU off by " + fmt("%.2e", worst_brute));

    std::size_t set_checks = 0;
    auto check_novelty = [&](const S& h, const S& training, double forced) {
        ResponseSet set;
        for (const auto& t : training) set.insert(normalize_whitespace(t));
        const double got = novelty(h, set);
        if (got != brute_novelty(h, training) || (forced >= 0 && got != forced)) {
            fail(o, "novelty mismatch (" + fmt("%.6f", got) + ")");
        }
        ++set_checks;
    };
    auto check_diversity = [&](const S& h, double forced) {
        const double got = diversity(h);
        if (got != brute_diversity(h) || (forced >= 0 && got != forced)) {
            fail(o, "diversity mismatch (" + fmt("%.6f", got) + ")");
        }
        ++set_checks;
    };
    check_novelty({"x", "y z"}, {"x", " y z"}, 0.0);
    check_novelty({"x", "y"}, {"x"}, 0.5);
    check_novelty({"p", "q"}, {"x"}, 1.0);
    check_diversity(S(5, "same"), 0.2);
    check_diversity({"a", "b", "c"}, 1.0);
    check_diversity({"a", "a", "b", "c"}, 0.75);
    const auto up_to_3 = all_sentences(3);
    for (int trial = 0; trial < 20000; ++trial) {
        S h, training;
        const std::size_t size = 1 + rng() % 6;
        for (std::size_t i = 0; i < size; ++i) h.push_back(up_to_3[rng() % up_to_3.size()]);
        for (std::size_t i = 0, k = rng() % 8; i < k; ++i) training.push_back(up_to_3[rng() % up_to_3.size()]);
        check_novelty(h, training, -1.0);
        check_diversity(h, -1.0);
    }
    o.detail = std::to_string(hand.size()) + " hand cases (max err " + fmt("%.1e", worst_hand) +
               "), " + std::to_string(compared) + " brute BLEU comparisons (max err " +
               fmt("%.1e", worst_brute) + "), " + std::to_string(set_checks) +
               " novelty/diversity checks" + (o.pass ? "" : "; " + o.detail);
    return o;
}

// 5 ---------------------------------------------------------------------------

Outcome prompt_and_causality_suite() {
    Outcome o;
    auto config = tiny_config(24, 61);
    config.max_positions = 72;
    for (auto kind : {RegimeKind::SoftPrompt, RegimeKind::DynamicPrompt}) {
        auto state = make_state(kind, config, 32, 62);
        for (std::size_t m = 1; m <= 32; ++m) {
            const auto pair = make_pair(m, 3, 24, 600 + m);
            const auto ex = assemble_input(state.regime, state.lm, pair);
            const auto prompt = build_prompt(state.regime, state.lm, pair.query, state.lm.embed(pair.query));
            if (prompt.length() != m || ex.layout.prompt_len != m || prompt_length(kind, m) != m ||
                ex.input_embeddings.rows() != 2 * m + 3) {
                fail(o, std::string(to_string(kind)) + " prompt rows wrong at m=" + std::to_string(m));
            }
        }
    }

    std::size_t controller_checks = 0;
    {
        Controller controller(config, 63);
        LanguageModel lm(config);
        const auto pair = make_pair(12, 1, 24, 64);
        const auto base = controller.forward(lm.embed(pair.query)).vectors;
        for (std::size_t j = 0; j < 12; ++j) {
            auto edited = pair.query;
            edited[j] = static_cast<TokenId>((edited[j] + 7) % 24);
            const auto out = controller.forward(lm.embed(edited)).vectors;
            for (std::size_t i = 0; i < j; ++i) {
                for (std::size_t c = 0; c < config.d_model; ++c) {
                    if (out.at(i, c) != base.at(i, c)) {
                        fail(o, "controller row " + std::to_string(i) + " depends on position " + std::to_string(j));
                    }
                }
                ++controller_checks;
            }
        }
    }

    std::size_t lm_checks = 0;
    {
        LanguageModel lm(config);
        std::mt19937_64 rng(65);
        std::vector<TokenId> ids(40);
        for (auto& id : ids) id = static_cast<TokenId>(rng() % 24);
        std::vector<TokenId> positions(ids.size());
        for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<TokenId>(i);
        const auto base = lm.forward(lm.embed(ids), positions);
        for (std::size_t j = 0; j < ids.size(); ++j) {
            auto edited = ids;
            edited[j] = static_cast<TokenId>((edited[j] + 5) % 24);
            const auto out = lm.forward(lm.embed(edited), positions);
            for (std::size_t i = 0; i < j; ++i) {
                for (std::size_t c = 0; c < 24; ++c) {
                    if (out.at(i, c) != base.at(i, c)) {
                        fail(o, "LM logits at " + std::to_string(i) + " depend on position " + std::to_string(j));
                    }
                }
                ++lm_checks;
            }
        }
    }
    if (o.pass) {
        o.detail = "prompt rows = m for m=1..32 in both prompt regimes; " +
                   std::to_string(controller_checks) + " controller and " + std::to_string(lm_checks) +
                   " LM (i<j) invariances bit-exact";
    }
    return o;
}

// 6 and 8 ---------------------------------------------------------------------

struct EndToEnd {
    Outcome outcome;
    bool ran = false;
    MetricRow fine_tune_test, dynamic_test;
};

std::vector<TextPair> memorization_pairs() {
    return {{"what is the color of the sky ?", "the sky is blue ."},
            {"where do you live ?", "i live by the river ."},
            {"how old is tom ?", "tom is nine years old ."},
            {"what do cats eat ?", "cats eat fish ."},
            {"who owns the red car ?", "anna owns the red car ."},
            {"when does the shop open ?", "the shop opens at eight ."},
            {"what is your name ?", "my name is rob ."},
            {"do you like tea ?", "yes , i drink tea every day ."}};
}

EndToEnd end_to_end_suite() {
    EndToEnd result;
    result.ran = true;
    Outcome& o = result.outcome;
    const auto start = std::chrono::steady_clock::now();
    const auto dir = scratch_dir("acceptance_e2e");

    ExperimentConfig config;
    write_synthetic_corpus(dir / "corpus", 600, 2024);
    config.train_path = dir / "corpus" / "train.txt";
    config.validation_path = dir / "corpus" / "valid.txt";
    config.test_path = dir / "corpus" / "test.txt";
    config.output_dir = dir / "out";
    config.tokenizer_vocab = 400;
    config.model.d_model = 32;
    config.model.n_layers = 2;
    config.model.n_heads = 4;
    config.model.d_ff = 64;
    config.model.max_positions = 64;
    config.model.controller_layers = 1;
    config.model.controller_heads = 4;
    config.pretrain.steps = 600;
    config.pretrain.batch_size = 8;
    config.pretrain.learning_rate = 3e-3;
    config.train.batch_size = 8;
    config.train.max_epochs = 8;
    config.train.patience_epochs = 3;
    config.train.max_new_tokens = 20;
    config.sweep.trials = 3;
    config.sweep.lr_low = 1e-3;
    config.sweep.lr_high = 3e-2;
    config.prompt_pool_capacity = 32;
    config.seed = 2024;
    config.validate();

    const auto tokenizer = cmd_prepare(config);
    const auto pretrained = cmd_pretrain(config);
    const auto& base = pretrained.checkpoint;
    const auto full = load_corpus(config.train_path, config.validation_path, config.test_path);
    const auto& model_config = base.state.lm.config();
    const auto train_pairs = usable_pairs(tokenizer, full.train, model_config, config.prompt_pool_capacity);
    const auto valid_pairs = usable_pairs(tokenizer, full.validation, model_config, config.prompt_pool_capacity);
    const auto test_pairs = usable_pairs(tokenizer, full.test, model_config, config.prompt_pool_capacity);
    const auto data = make_training_data(tokenizer, train_pairs, valid_pairs);
    const auto training_responses = training_response_set(full.train);

    const double base_bleu1 = validation_bleu(base.state, data, 1, config.train.max_new_tokens);
    std::string detail = "vocab " + std::to_string(tokenizer.vocab_size()) + ", " +
                         std::to_string(train_pairs.size()) + " train pairs, pretrain ppl " +
                         fmt("%.1f", pretrained.initial_perplexity) + "->" +
                         fmt("%.1f", pretrained.final_perplexity) + ", base BLEU1 " +
                         fmt("%.4f", base_bleu1);
    if (tokenizer.vocab_size() > 512) fail(o, "vocabulary above 512");

    for (auto kind : config.regimes) {
        const std::uint64_t seed = cell_seed(config.seed, kind, 1.0);
        const ModelFactory factory = [&] {
            return ModelState{base.state.lm.clone(),
                              AdaptationRegime::create(kind, model_config, config.prompt_pool_capacity,
                                                       derive_seed(seed, "regime"))};
        };
        TrainConfig train_config = config.train;
        train_config.seed = derive_seed(seed, "train");
        try {
            const auto swept = sweep(factory, data, train_config, config.sweep);
            const double bleu1 = validation_bleu(swept.best.best, data, 1, config.train.max_new_tokens);
            detail += ", " + std::string(to_string(kind)) + " BLEU1 " + fmt("%.4f", bleu1) + " (lr " +
                      fmt("%.2g", swept.best_learning_rate) + ")";
            if (!(bleu1 > base_bleu1)) fail(o, std::string(to_string(kind)) + " does not beat the base");
            const auto test = evaluate(swept.best.best.regime, swept.best.best.lm, tokenizer, test_pairs,
                                       training_responses, config.train.max_new_tokens);
            if (kind == RegimeKind::FineTune) result.fine_tune_test = test.row;
            if (kind == RegimeKind::DynamicPrompt) result.dynamic_test = test.row;
        } catch (const SweepError& e) {
            fail(o, std::string(to_string(kind)) + " sweep failed: " + e.what());
        }
    }

    // Memorization of eight fixed pairs from the pretrained base.
    const auto pairs = memorization_pairs();
    auto memo_data = make_training_data(tokenizer, pairs, pairs);
    TrainConfig memo;
    memo.learning_rate = 3e-3;
    memo.batch_size = 8;
    memo.max_epochs = 2000;
    memo.patience_epochs = 200;
    memo.eval_every = 25;
    memo.seed = derive_seed(config.seed, "memorize");
    memo.max_new_tokens = 24;
    const ModelState memo_start{base.state.lm.clone(),
                                AdaptationRegime::create(RegimeKind::FineTune, model_config, 0, 0)};
    const auto memorized = train(memo_start, memo_data, memo);
    std::size_t reproduced = 0;
    for (const auto& p : pairs) {
        const auto ids = greedy_decode(memorized.best.regime, memorized.best.lm, tokenizer.encode(p.query),
                                       memo.max_new_tokens);
        reproduced += tokenizer.decode(ids) == normalize_whitespace(p.response);
    }
    detail += ", memorized " + std::to_string(reproduced) + "/8 in " +
              std::to_string(memorized.epochs_run) + " steps";
    if (reproduced < 7) fail(o, "memorized only " + std::to_string(reproduced) + "/8");
    if (memorized.epochs_run > 2000) fail(o, "memorization exceeded 2000 steps");

    const double elapsed = seconds_since(start);
    detail += ", " + fmt("%.0f", elapsed) + " s";
    if (elapsed > 1800.0) fail(o, "run exceeded 30 minutes");
    o.detail = detail + (o.pass ? "" : "; " + o.detail);
    return result;
}

// 7 ---------------------------------------------------------------------------

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        out[fs::relative(entry.path(), dir).string()] = buf.str();
    }
    return out;
}

Outcome harness_suite() {
    Outcome o;
    auto run = [](const fs::path& dir) {
        auto config = small_experiment(dir, 60, 71);
        cmd_prepare(config);
        cmd_pretrain(config);
        auto table = cmd_run_grid(config);
        cmd_export(report_path(config), config.output_dir / "export");
        return std::pair{config, table};
    };
    const auto [config_a, table_a] = run(scratch_dir("acceptance_grid_a"));
    const auto [config_b, table_b] = run(scratch_dir("acceptance_grid_b"));

    if (table_a.rows.size() != 18) fail(o, std::to_string(table_a.rows.size()) + " rows");
    std::set<std::size_t> val_sizes, test_sizes;
    for (const auto& r : table_a.rows) {
        val_sizes.insert(r.validation_pairs);
        test_sizes.insert(r.test_pairs);
        if (!r.ok) fail(o, r.regime + " " + fmt("%.2f", r.fraction) + " failed: " + r.error);
    }
    if (val_sizes.size() != 1 || test_sizes.size() != 1) fail(o, "evaluation sizes differ across cells");

    const std::string header = report_csv(table_a).substr(0, report_csv(table_a).find('\n'));
    for (const char* column : {"BLEU1", "BLEU2", "BLEU3", "BLEU4", "Novelty", "Diversity"}) {
        if (header.find(column) == std::string::npos) fail(o, std::string("missing column ") + column);
    }

    const auto files_a = tree(config_a.output_dir), files_b = tree(config_b.output_dir);
    if (files_a != files_b) fail(o, "independent reruns differ");
    cmd_run_grid(config_a);
    if (tree(config_a.output_dir) != files_a) fail(o, "resumed rerun changed files");
    if (o.pass) {
        o.detail = "18 rows, validation " + std::to_string(*val_sizes.begin()) + " and test " +
                   std::to_string(*test_sizes.begin()) + " pairs in every cell, " +
                   std::to_string(files_a.size()) + " output files byte-identical across reruns";
    }
    return o;
}

void print(int id, const char* name, const Outcome& o, bool gated) {
    const char* status = gated ? (o.pass ? "PASS" : "FAIL") : "INFO";
    std::printf("[%s] criterion %d %-22s %s\n", status, id, name, o.detail.c_str());
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    auto wanted = [&](int id) { return selected.empty() || selected.contains(id); };

    bool all_pass = true;
    auto gated = [&](int id, const char* name, const std::function<Outcome()>& fn) {
        if (!wanted(id)) return;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        all_pass &= o.pass;
        print(id, name, o, true);
    };

    gated(1, "gradients", gradient_suite);
    gated(2, "freezing", freezing_suite);
    gated(3, "loss-mask", loss_mask_suite);
    gated(4, "metric-oracles", metric_oracle_suite);
    gated(5, "prompt-length/causal", prompt_and_causality_suite);

    EndToEnd e2e;
    gated(6, "end-to-end", [&] {
        e2e = end_to_end_suite();
        return e2e.outcome;
    });
    gated(7, "harness", harness_suite);

    if (wanted(8)) {
        Outcome o;
        if (!e2e.ran || !e2e.outcome.detail.size()) {
            o.detail = "not measured (criterion 6 not run)";
        } else {
            const bool novelty_ok = e2e.dynamic_test.novelty >= e2e.fine_tune_test.novelty;
            const bool diversity_ok = e2e.dynamic_test.diversity >= e2e.fine_tune_test.diversity;
            o.detail = "fraction 1.0 test: dynamic_prompt novelty " + fmt("%.4f", e2e.dynamic_test.novelty) +
                       " vs fine_tune " + fmt("%.4f", e2e.fine_tune_test.novelty) + (novelty_ok ? " (>=)" : " (<)") +
                       ", diversity " + fmt("%.4f", e2e.dynamic_test.diversity) + " vs " +
                       fmt("%.4f", e2e.fine_tune_test.diversity) + (diversity_ok ? " (>=)" : " (<)");
        }
        print(8, "novelty/diversity", o, false);
    }

    std::printf("%s\n", all_pass ? "acceptance: all gated criteria passed" : "acceptance: FAILED");
    return all_pass ? 0 : 1;
}
