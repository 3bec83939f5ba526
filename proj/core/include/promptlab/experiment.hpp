#pragma once

// Experiment orchestration: corpus preparation, surrogate pre-training, the
// regime x fraction grid, report export and the chat loop.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "promptlab/adaptation.hpp"
#include "promptlab/checkpoint.hpp"
#include "promptlab/corpus.hpp"
#include "promptlab/metrics.hpp"
#include "promptlab/model.hpp"
#include "promptlab/trainer.hpp"

namespace promptlab {

struct PretrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    std::size_t log_every = 100;
};

struct ExperimentConfig {
    std::filesystem::path train_path;
    std::filesystem::path validation_path;
    std::filesystem::path test_path;
    std::size_t tokenizer_vocab = 512;
    ModelConfig model;
    PretrainConfig pretrain;
    TrainConfig train;
    SweepConfig sweep;
    std::vector<RegimeKind> regimes{RegimeKind::FineTune, RegimeKind::SoftPrompt,
                                    RegimeKind::DynamicPrompt};
    std::vector<double> fractions{0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
    std::size_t prompt_pool_capacity = 64;
    std::filesystem::path output_dir = "runs";
    std::uint64_t seed = 0;
    /// Grid cells run concurrently.
    std::size_t workers = 1;

    void validate() const;

    /// Relative corpus and output paths resolve against `base_dir`.
    static ExperimentConfig from_json(std::string_view text,
                                      const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& path);
};

std::filesystem::path tokenizer_path(const ExperimentConfig& config);
std::filesystem::path base_checkpoint_path(const ExperimentConfig& config);
std::filesystem::path report_path(const ExperimentConfig& config);

/// Writes train/valid/test corpus files of synthetic dialogs (80/10/10 split).
void write_synthetic_corpus(const std::filesystem::path& dir, std::size_t dialogs,
                            std::uint64_t seed);

/// Trains the tokenizer on the training split and writes it to the output directory.
Tokenizer cmd_prepare(const ExperimentConfig& config);
Tokenizer load_tokenizer(const std::filesystem::path& path);

struct PretrainResult {
    Checkpoint checkpoint;
    double initial_perplexity = 0.0;
    double final_perplexity = 0.0;
    std::vector<double> loss_history;
};

using StepSink = std::function<void(std::size_t step, double loss)>;

/// Plain next-token training of a fresh LM over training-split utterances.
/// Perplexities are measured on validation utterances.
PretrainResult pretrain(const ExperimentConfig& config, const Tokenizer& tokenizer,
                        const CorpusSplit& corpus, const StepSink& sink = {});

/// Runs pretrain() and writes the base checkpoint plus a step log.
PretrainResult cmd_pretrain(const ExperimentConfig& config);

struct ReportRow {
    std::string regime;
    double fraction = 0.0;
    bool ok = true;
    std::string error;
    MetricRow metrics;
    double best_learning_rate = 0.0;
    std::size_t epoch_of_best = 0;
    double best_val_bleu = 0.0;
    std::size_t train_pairs = 0;
    std::size_t validation_pairs = 0;
    std::size_t test_pairs = 0;
    std::uint64_t seed = 0;

    bool operator==(const ReportRow&) const = default;
};

struct ReportTable {
    std::vector<ReportRow> rows;

    std::string to_json() const;
    static ReportTable from_json(std::string_view text);
    /// Throws IoError when missing.
    static ReportTable load(const std::filesystem::path& path);

    bool operator==(const ReportTable&) const = default;
};

/// Seed of one grid cell, derived from the master seed and the cell key.
std::uint64_t cell_seed(std::uint64_t master, RegimeKind regime, double fraction);
std::filesystem::path cell_directory(const ExperimentConfig& config, RegimeKind regime,
                                     double fraction);

/// Pairs usable by every regime: non-empty query, response non-empty after
/// tokenisation, and query short enough for prompt + query + one response token.
std::vector<TextPair> usable_pairs(const Tokenizer& tokenizer, std::span<const TextPair> pairs,
                                   const ModelConfig& model, std::size_t pool_capacity);

using CellSink = std::function<void(const ReportRow& row, bool resumed)>;

/// For each (regime, fraction): subsample, sweep, evaluate on the full test
/// split. Cells with an on-disk row are skipped. report.json is written only
/// when its content changes.
ReportTable cmd_run_grid(const ExperimentConfig& config, const CellSink& sink = {});

/// Writes report.csv and plot_data.csv into `out_dir`. An empty report is
/// rejected before any file is written.
void cmd_export(const std::filesystem::path& report, const std::filesystem::path& out_dir);

std::string report_csv(const ReportTable& table);
std::string plot_data_csv(const ReportTable& table);

/// Scores a checkpoint on the configured test split with the same pair
/// filtering the grid uses.
Evaluation cmd_evaluate(const ExperimentConfig& config, const Checkpoint& checkpoint);

/// Line-oriented session: one query per line, one greedy response per line.
/// Returns the exit status.
int chat_session(const Checkpoint& checkpoint, std::istream& in, std::ostream& out,
                 std::size_t max_new_tokens, bool show_prompt = true);

}  // namespace promptlab
