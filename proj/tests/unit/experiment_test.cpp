#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "promptlab/errors.hpp"
#include "promptlab/experiment.hpp"

using namespace promptlab;
using namespace promptlab::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) out[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
    }
    return out;
}

std::map<std::string, fs::file_time_type> mtimes(const fs::path& dir) {
    std::map<std::string, fs::file_time_type> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) out[entry.path().string()] = entry.last_write_time();
    }
    return out;
}

}  // namespace

TEST(ExperimentConfig, ParsesAndResolvesPaths) {
    const auto c = ExperimentConfig::from_json(R"({
        "corpus": {"train": "c/train.txt", "validation": "c/valid.txt", "test": "/abs/test.txt"},
        "output_dir": "out",
        "tokenizer_vocab": 300,
        "model": {"d_model": 16, "n_layers": 1, "n_heads": 2, "d_ff": 32, "max_positions": 40},
        "pretrain": {"steps": 7, "learning_rate": 0.01},
        "train": {"batch_size": 3, "max_epochs": 4, "patience_epochs": 2},
        "sweep": {"trials": 2, "lr_low": 0.001, "lr_high": 0.01},
        "regimes": ["dynamic_prompt", "fine_tune"],
        "fractions": [0.5, 1.0],
        "seed": 11,
        "workers": 2
    })", "/base");
    EXPECT_EQ(c.train_path, fs::path("/base/c/train.txt"));
    EXPECT_EQ(c.test_path, fs::path("/abs/test.txt"));
    EXPECT_EQ(c.output_dir, fs::path("/base/out"));
    EXPECT_EQ(c.tokenizer_vocab, 300u);
    EXPECT_EQ(c.model.max_positions, 40u);
    EXPECT_EQ(c.pretrain.steps, 7u);
    EXPECT_EQ(c.pretrain.batch_size, PretrainConfig{}.batch_size);
    EXPECT_EQ(c.train.batch_size, 3u);
    EXPECT_EQ(c.sweep.trials, 2u);
    EXPECT_EQ(c.regimes, (std::vector<RegimeKind>{RegimeKind::DynamicPrompt, RegimeKind::FineTune}));
    EXPECT_EQ(c.fractions, (std::vector<double>{0.5, 1.0}));
    EXPECT_EQ(c.seed, 11u);
    EXPECT_EQ(c.workers, 2u);
    EXPECT_NO_THROW(c.validate());
}

TEST(ExperimentConfig, Rejections) {
    EXPECT_THROW(ExperimentConfig::from_json("{nope"), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_json("[1]"), ConfigError);
    EXPECT_THROW(ExperimentConfig::from_json(R"({"tokenizer_vocab": "big"})"), ConfigError);
    EXPECT_THROW(ExperimentConfig::load("/definitely/missing.json"), IoError);

    auto c = small_experiment(scratch_dir("cfg_reject"), 20, 1);
    EXPECT_NO_THROW(c.validate());
    auto bad = c;
    bad.fractions = {0.5, 0.2};
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.fractions = {0.0};
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.regimes.clear();
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.workers = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.train_path.clear();
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(SyntheticCorpus, SplitSizesAndDeterminism) {
    const auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
    write_synthetic_corpus(a, 50, 4);
    write_synthetic_corpus(b, 50, 4);
    EXPECT_EQ(snapshot(a), snapshot(b));
    const auto split = load_corpus(a / "train.txt", a / "valid.txt", a / "test.txt");
    EXPECT_FALSE(split.train.empty());
    EXPECT_THROW(write_synthetic_corpus(scratch_dir("synth_c"), 3, 1), ConfigError);
}

TEST(Pretrain, DeterministicAndImproves) {
    const auto dir = scratch_dir("pretrain");
    auto config = small_experiment(dir, 40, 2);
    config.pretrain.steps = 40;
    const auto tok = cmd_prepare(config);
    EXPECT_EQ(load_tokenizer(tokenizer_path(config)), tok);
    const auto corpus = load_corpus(config.train_path, config.validation_path, config.test_path);

    std::vector<std::size_t> steps;
    const auto a = pretrain(config, tok, corpus, [&](std::size_t s, double) { steps.push_back(s); });
    const auto b = pretrain(config, tok, corpus);
    EXPECT_EQ(serialize_checkpoint(a.checkpoint), serialize_checkpoint(b.checkpoint));
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_EQ(a.loss_history.size(), 40u);
    EXPECT_EQ(steps.size(), 40u);
    EXPECT_LT(a.final_perplexity, a.initial_perplexity);

    config.pretrain.steps = 0;
    const auto zero = pretrain(config, tok, corpus);
    EXPECT_EQ(zero.initial_perplexity, zero.final_perplexity);
    ModelConfig model = config.model;
    model.vocab_size = tok.vocab_size();
    model.seed = zero.checkpoint.state.lm.config().seed;
    EXPECT_EQ(parameter_checksum(zero.checkpoint.state.lm.parameters()),
              parameter_checksum(LanguageModel(model).parameters()));
}

TEST(UsablePairs, FiltersLongQueriesAndEmptyResponses) {
    const auto pairs = make_pairs(synthetic_dialogs(20, 3));
    const auto tok = train_tokenizer(pairs, 300);
    ModelConfig model;
    model.max_positions = 48;
    std::vector<TextPair> input = pairs;
    input.push_back({std::string(200, 'a'), "ok"});
    input.push_back({"hello", "   "});
    const auto kept = usable_pairs(tok, input, model, 64);
    EXPECT_LE(kept.size(), pairs.size());
    for (const auto& p : kept) {
        const auto q = tok.encode(p.query).size();
        EXPECT_GT(q, 0u);
        EXPECT_LE(2 * q + 1, model.max_positions);
        EXPECT_FALSE(tok.encode(p.response).empty());
    }
    const auto capped = usable_pairs(tok, pairs, model, 2);
    for (const auto& p : capped) EXPECT_LE(tok.encode(p.query).size(), 2u);
}

class GridTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new fs::path(scratch_dir("grid"));
        config_ = new ExperimentConfig(small_experiment(*dir_, 40, 5));
        cmd_prepare(*config_);
        cmd_pretrain(*config_);
        table_ = new ReportTable(cmd_run_grid(*config_));
    }
    static void TearDownTestSuite() {
        delete table_;
        delete config_;
        delete dir_;
    }
    static fs::path* dir_;
    static ExperimentConfig* config_;
    static ReportTable* table_;
};

fs::path* GridTest::dir_ = nullptr;
ExperimentConfig* GridTest::config_ = nullptr;
ReportTable* GridTest::table_ = nullptr;

TEST_F(GridTest, EighteenRowsWithSharedEvaluationSets) {
    ASSERT_EQ(table_->rows.size(), 18u);
    std::size_t index = 0;
    for (auto regime : config_->regimes) {
        std::size_t previous_train = 0;
        for (double fraction : config_->fractions) {
            const auto& row = table_->rows[index++];
            EXPECT_EQ(row.regime, to_string(regime));
            EXPECT_EQ(row.fraction, fraction);
            EXPECT_TRUE(row.ok) << row.error;
            EXPECT_EQ(row.validation_pairs, table_->rows.front().validation_pairs);
            EXPECT_EQ(row.test_pairs, table_->rows.front().test_pairs);
            EXPECT_GE(row.train_pairs, previous_train);
            previous_train = row.train_pairs;
            EXPECT_EQ(row.seed, cell_seed(config_->seed, regime, fraction));
            for (const char* f : {"row.json", "trials.csv", "trial_0.jsonl", "best.ckpt",
                                  "hypotheses.txt"}) {
                EXPECT_TRUE(fs::exists(cell_directory(*config_, regime, fraction) / f)) << f;
            }
        }
    }
    EXPECT_EQ(ReportTable::load(report_path(*config_)), *table_);
}

TEST_F(GridTest, RerunTouchesNothing) {
    const auto before = snapshot(config_->output_dir);
    const auto times = mtimes(config_->output_dir);
    std::size_t resumed = 0;
    const auto again = cmd_run_grid(*config_, [&](const ReportRow&, bool r) { resumed += r; });
    EXPECT_EQ(resumed, 18u);
    EXPECT_EQ(again, *table_);
    EXPECT_EQ(snapshot(config_->output_dir), before);
    EXPECT_EQ(mtimes(config_->output_dir), times);
}

TEST_F(GridTest, ResumeRecomputesDeletedCellIdentically) {
    const auto before = snapshot(config_->output_dir);
    const auto cell = cell_directory(*config_, RegimeKind::SoftPrompt, 0.3);
    fs::remove_all(cell);
    fs::remove(report_path(*config_));
    std::size_t fresh = 0;
    const auto again = cmd_run_grid(*config_, [&](const ReportRow&, bool r) { fresh += !r; });
    EXPECT_EQ(fresh, 1u);
    EXPECT_EQ(again, *table_);
    EXPECT_EQ(snapshot(config_->output_dir), before);
}

TEST_F(GridTest, RowRecomputableFromBestCheckpoint) {
    const auto& row = table_->rows[13];
    const auto kind = parse_regime_kind(row.regime);
    const auto ckpt = load_checkpoint(cell_directory(*config_, kind, row.fraction) / "best.ckpt");
    EXPECT_EQ(ckpt.state.regime.kind, kind);
    const auto evaluation = cmd_evaluate(*config_, ckpt);
    EXPECT_EQ(evaluation.row, row.metrics);
}

TEST_F(GridTest, ExportIsStable) {
    const auto out_a = scratch_dir("export_a"), out_b = scratch_dir("export_b");
    cmd_export(report_path(*config_), out_a);
    cmd_export(report_path(*config_), out_b);
    EXPECT_EQ(snapshot(out_a), snapshot(out_b));
    const auto plot = slurp(out_a / "plot_data.csv");
    std::map<std::string, std::size_t> per_metric;
    std::istringstream lines(plot);
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "metric,regime,fraction,value");
    while (std::getline(lines, line)) ++per_metric[line.substr(0, line.find(','))];
    EXPECT_EQ(per_metric.size(), 6u);
    for (const auto& [metric, count] : per_metric) EXPECT_EQ(count, 18u) << metric;
    const auto csv = slurp(out_a / "report.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 19);
}

TEST(Export, EmptyAndMissingReports) {
    const auto dir = scratch_dir("export_empty");
    std::ofstream(dir / "report.json") << ReportTable{}.to_json();
    const auto out = dir / "out";
    fs::create_directories(out);
    EXPECT_THROW(cmd_export(dir / "report.json", out), FormatError);
    EXPECT_TRUE(fs::is_empty(out));
    EXPECT_THROW(cmd_export(dir / "missing.json", out), IoError);
}

TEST(ReportTable, JsonRoundTrip) {
    ReportTable t;
    ReportRow ok;
    ok.regime = "soft_prompt";
    ok.fraction = 0.3;
    ok.metrics = {0.5, 0.25, 0.125, 0.0625, 0.75, 0.2};
    ok.best_learning_rate = 3.1622776601683795e-3;
    ok.seed = 1234567890123ull;
    ReportRow failed;
    failed.regime = "fine_tune";
    failed.fraction = 1.0;
    failed.ok = false;
    failed.error = "all trials diverged";
    t.rows = {ok, failed};
    EXPECT_EQ(ReportTable::from_json(t.to_json()), t);
    const auto csv = report_csv(t);
    EXPECT_NE(csv.find(",failed\n"), std::string::npos);
    EXPECT_EQ(plot_data_csv(t).find("fine_tune"), std::string::npos);
}

TEST(Chat, SessionBehaviour) {
    const auto pairs = make_pairs(synthetic_dialogs(20, 6));
    const auto tok = train_tokenizer(pairs, 300);
    Checkpoint ckpt{make_state(RegimeKind::DynamicPrompt, tiny_config(tok.vocab_size())), tok};

    std::istringstream in("hello there\n\n   \nhello there\n" + std::string(300, 'z') + "\n");
    std::ostringstream out;
    EXPECT_EQ(chat_session(ckpt, in, out, 5), 0);
    std::vector<std::string> lines;
    std::istringstream result(out.str());
    for (std::string line; std::getline(result, line);) lines.push_back(line);
    ASSERT_GE(lines.size(), 3u);
    EXPECT_EQ(out.str().rfind("> ", 0), 0u);

    std::istringstream quiet_in("hello there\nhello there\n" + std::string(300, 'z') + "\n");
    std::ostringstream quiet;
    EXPECT_EQ(chat_session(ckpt, quiet_in, quiet, 5, false), 0);
    std::vector<std::string> replies;
    std::istringstream q(quiet.str());
    for (std::string line; std::getline(q, line);) replies.push_back(line);
    ASSERT_EQ(replies.size(), 3u);
    EXPECT_EQ(replies[0], replies[1]);
    EXPECT_EQ(replies[2].rfind("[input too long", 0), 0u);

    std::istringstream empty;
    std::ostringstream sink;
    EXPECT_EQ(chat_session(ckpt, empty, sink, 5, false), 0);
    EXPECT_TRUE(sink.str().empty());
}
