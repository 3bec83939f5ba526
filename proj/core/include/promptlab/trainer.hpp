#pragma once

// Optimisation loop, learning-rate sweep, and greedy decoding.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promptlab/adaptation.hpp"
#include "promptlab/corpus.hpp"
#include "promptlab/model.hpp"
#include "promptlab/tokenizer.hpp"

namespace promptlab {

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 8;
    std::size_t max_epochs = 300;
    /// Epochs without a validation-BLEU improvement before stopping.
    std::size_t patience_epochs = 100;
    std::size_t eval_every = 1;
    std::uint64_t seed = 0;
    int selection_bleu_order = 4;
    std::size_t max_new_tokens = 32;
    double clip_norm = 1.0;

    void validate() const;
};

struct SweepConfig {
    std::size_t trials = 12;
    double lr_low = 3e-6;
    double lr_high = 0.009;
    /// Trials trained concurrently.
    std::size_t workers = 1;

    void validate() const;
    /// Log-uniform grid, ascending, endpoints exact. A single trial uses the
    /// geometric midpoint.
    std::vector<double> learning_rates() const;
};

/// An LM together with its adaptation state; the unit that is trained,
/// selected and checkpointed.
struct ModelState {
    LanguageModel lm;
    AdaptationRegime regime;

    ModelState clone() const { return {lm.clone(), regime.clone()}; }
};

struct ValidationSet {
    std::vector<std::vector<TokenId>> queries;
    std::vector<std::string> references;
};

struct TrainingData {
    std::vector<DialogPair> train;
    ValidationSet validation;
    Tokenizer tokenizer;
};

TrainingData make_training_data(const Tokenizer& tokenizer, std::span<const TextPair> train,
                                std::span<const TextPair> validation);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_bleu;
};

using ProgressSink = std::function<void(const EpochRecord&)>;

struct TrainResult {
    ModelState best;
    double best_val_bleu = 0.0;
    std::size_t epoch_of_best = 0;
    std::size_t epochs_run = 0;
    std::vector<double> loss_history;      // mean train loss per epoch
    std::vector<double> val_bleu_history;  // one entry per evaluation
};

/// Shuffled mini-batch Adam over the regime's trainable groups, with
/// validation BLEU every `eval_every` epochs and patience-based stopping.
/// Returns the state from the best-scoring evaluation, not the last epoch.
/// Throws DivergenceError on a non-finite loss.
TrainResult train(const ModelState& start, const TrainingData& data, const TrainConfig& config,
                  const ProgressSink& progress = {});

/// Validation BLEU-n of greedy outputs.
double validation_bleu(const ModelState& state, const TrainingData& data, int order,
                       std::size_t max_new_tokens);

struct TrialOutcome {
    double learning_rate = 0.0;
    bool ok = false;
    double best_val_bleu = 0.0;
    std::size_t epoch_of_best = 0;
    std::size_t epochs_run = 0;
    std::string error;
};

struct SweepResult {
    TrainResult best;
    double best_learning_rate = 0.0;
    std::size_t best_trial = 0;
    std::vector<TrialOutcome> trials;
};

using ModelFactory = std::function<ModelState()>;
using TrialSinkFactory = std::function<ProgressSink(std::size_t trial, double learning_rate)>;

/// One training run per grid learning rate; the winner has the highest
/// validation BLEU, ties going to the smaller rate. Throws SweepError when
/// every trial diverged.
SweepResult sweep(const ModelFactory& factory, const TrainingData& data,
                  const TrainConfig& base_config, const SweepConfig& sweep_config,
                  const TrialSinkFactory& sinks = {});

/// First index of the maximum.
std::size_t argmax(std::span<const double> values);

using NextTokenLogits = std::function<std::vector<double>(std::span<const TokenId> generated)>;

/// Argmax chain: appends the best next token until `eos` or the length cap.
std::vector<TokenId> greedy_decode(const NextTokenLogits& next_logits,
                                   std::size_t max_new_tokens, TokenId eos);

/// Decodes a response to `query` under the regime's prefix. Generation also
/// stops when the sequence reaches max_positions.
std::vector<TokenId> greedy_decode(const AdaptationRegime& regime, const LanguageModel& lm,
                                   std::span<const TokenId> query, std::size_t max_new_tokens,
                                   TokenId eos = Tokenizer::kEos);

}  // namespace promptlab
