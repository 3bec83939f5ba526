#include "promptlab/trainer.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <thread>

#include "promptlab/errors.hpp"
#include "promptlab/metrics.hpp"
#include "promptlab/optimizer.hpp"

namespace promptlab {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (max_epochs == 0) throw ConfigError("train: max_epochs must be positive");
    if (patience_epochs > max_epochs) throw ConfigError("train: patience_epochs exceeds max_epochs");
    if (eval_every == 0) throw ConfigError("train: eval_every must be positive");
    if (selection_bleu_order < 1 || selection_bleu_order > 4) {
        throw ConfigError("train: selection_bleu_order must be in 1..4");
    }
    if (max_new_tokens == 0) throw ConfigError("train: max_new_tokens must be positive");
}

void SweepConfig::validate() const {
    if (trials == 0) throw ConfigError("sweep: trials must be at least 1");
    if (!(lr_low > 0.0 && lr_low < lr_high)) {
        throw ConfigError("sweep: need 0 < lr_low < lr_high");
    }
    if (workers == 0) throw ConfigError("sweep: workers must be at least 1");
}

std::vector<double> SweepConfig::learning_rates() const {
    validate();
    if (trials == 1) return {std::sqrt(lr_low * lr_high)};
    const double lo = std::log(lr_low), hi = std::log(lr_high);
    std::vector<double> rates(trials);
    for (std::size_t i = 0; i < trials; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(trials - 1);
        rates[i] = std::exp(lo + t * (hi - lo));
    }
    rates.front() = lr_low;
    rates.back() = lr_high;
    return rates;
}

TrainingData make_training_data(const Tokenizer& tokenizer, std::span<const TextPair> train,
                                std::span<const TextPair> validation) {
    TrainingData data;
    data.tokenizer = tokenizer;
    data.train = encode_pairs(tokenizer, train);
    for (const auto& pair : validation) {
        auto query = tokenizer.encode(pair.query);
        if (query.empty()) continue;
        data.validation.queries.push_back(std::move(query));
        data.validation.references.push_back(normalize_whitespace(pair.response));
    }
    return data;
}

double validation_bleu(const ModelState& state, const TrainingData& data, int order,
                       std::size_t max_new_tokens) {
    std::vector<std::string> hypotheses;
    hypotheses.reserve(data.validation.queries.size());
    for (const auto& query : data.validation.queries) {
        const auto ids = greedy_decode(state.regime, state.lm, query, max_new_tokens);
        hypotheses.push_back(data.tokenizer.decode(ids));
    }
    return bleu(hypotheses, data.validation.references, order);
}

TrainResult train(const ModelState& start, const TrainingData& data, const TrainConfig& config,
                  const ProgressSink& progress) {
    config.validate();
    if (data.train.empty()) throw EmptyInputError("train: no training pairs");
    if (data.validation.queries.empty()) throw EmptyInputError("train: no validation pairs");

    ModelState state = start.clone();
    state.regime.validate();
    apply_freezing(state.regime, state.lm);
    auto params = trainable_parameters(state.regime, state.lm);
    if (params.empty()) throw ConfigError("train: regime has no trainable parameters");
    Adam optimizer(std::move(params),
                   {config.learning_rate, 0.9, 0.999, 1e-8, config.clip_norm});

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(data.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result{state.clone(), 0.0, 0, 0, {}, {}};
    bool have_best = false;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }

        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - begin);
            ++step;
            for (std::size_t k = begin; k < end; ++k) {
                Tensor loss;
                try {
                    loss = sequence_loss(state.regime, state.lm, data.train[order[k]]);
                } catch (const NumericError& e) {
                    throw DivergenceError(std::string(e.what()) + " at epoch " +
                                          std::to_string(epoch) + ", step " + std::to_string(step));
                }
                const double value = loss.item();
                if (!std::isfinite(value)) {
                    throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                                          ", step " + std::to_string(step));
                }
                epoch_loss += value;
                scale(loss, inv_batch).backward();
            }
            try {
                optimizer.step();
            } catch (const DivergenceError&) {
                throw DivergenceError("non-finite gradient at epoch " + std::to_string(epoch) +
                                      ", step " + std::to_string(step));
            }
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(order.size()));
        result.epochs_run = epoch;

        EpochRecord record{epoch, result.loss_history.back(), std::nullopt};
        const bool last = epoch == config.max_epochs;
        if (epoch % config.eval_every == 0 || (last && !have_best)) {
            const double score = validation_bleu(state, data, config.selection_bleu_order,
                                                 config.max_new_tokens);
            record.val_bleu = score;
            result.val_bleu_history.push_back(score);
            if (!have_best || score > result.best_val_bleu) {
                have_best = true;
                result.best_val_bleu = score;
                result.epoch_of_best = epoch;
                result.best = state.clone();
            }
        }
        if (progress) progress(record);
        if (have_best && epoch - result.epoch_of_best >= config.patience_epochs) break;
    }
    return result;
}

SweepResult sweep(const ModelFactory& factory, const TrainingData& data,
                  const TrainConfig& base_config, const SweepConfig& sweep_config,
                  const TrialSinkFactory& sinks) {
    const auto rates = sweep_config.learning_rates();
    std::vector<std::optional<TrainResult>> results(rates.size());
    std::vector<TrialOutcome> outcomes(rates.size());
    std::vector<std::exception_ptr> failures(rates.size());

    auto run_trial = [&](std::size_t i) {
        TrainConfig config = base_config;
        config.learning_rate = rates[i];
        outcomes[i].learning_rate = rates[i];
        try {
            ProgressSink sink = sinks ? sinks(i, rates[i]) : ProgressSink{};
            results[i] = train(factory(), data, config, sink);
            outcomes[i].ok = true;
            outcomes[i].best_val_bleu = results[i]->best_val_bleu;
            outcomes[i].epoch_of_best = results[i]->epoch_of_best;
            outcomes[i].epochs_run = results[i]->epochs_run;
        } catch (const DivergenceError& e) {
            outcomes[i].error = e.what();
        } catch (...) {
            failures[i] = std::current_exception();
        }
    };

    const std::size_t workers = std::min(sweep_config.workers, rates.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < rates.size(); ++i) run_trial(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < rates.size(); i = next++) run_trial(i);
            });
        }
    }
    for (const auto& failure : failures) {
        if (failure) std::rethrow_exception(failure);
    }

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!outcomes[i].ok) continue;
        if (!best || outcomes[i].best_val_bleu > outcomes[*best].best_val_bleu) best = i;
    }
    if (!best) {
        std::string detail;
        for (const auto& o : outcomes) {
            detail += "\n  lr=" + std::to_string(o.learning_rate) + ": " + o.error;
        }
        throw SweepError("every sweep trial diverged:" + detail);
    }
    SweepResult out{std::move(*results[*best]), rates[*best], *best, std::move(outcomes)};
    return out;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

std::vector<TokenId> greedy_decode(const NextTokenLogits& next_logits,
                                   std::size_t max_new_tokens, TokenId eos) {
    std::vector<TokenId> generated;
    while (generated.size() < max_new_tokens) {
        const auto logits = next_logits(generated);
        if (logits.empty()) break;
        const auto token = static_cast<TokenId>(argmax(logits));
        if (token == eos) break;
        generated.push_back(token);
    }
    return generated;
}

std::vector<TokenId> greedy_decode(const AdaptationRegime& regime, const LanguageModel& lm,
                                   std::span<const TokenId> query, std::size_t max_new_tokens,
                                   TokenId eos) {
    NoGradGuard no_grad;
    const Tensor prefix = assemble_prefix(regime, lm, query);
    const std::size_t vocab = lm.config().vocab_size;
    const std::size_t max_positions = lm.config().max_positions;

    auto next = [&](std::span<const TokenId> generated) -> std::vector<double> {
        const std::size_t length = prefix.rows() + generated.size();
        if (length > max_positions) return {};
        Tensor input = prefix;
        if (!generated.empty()) {
            const std::vector<Tensor> parts{prefix, lm.embed(generated)};
            input = concat_rows(parts);
        }
        std::vector<TokenId> positions(length);
        for (std::size_t i = 0; i < length; ++i) positions[i] = static_cast<TokenId>(i);
        const Tensor logits = lm.forward(input, positions);
        const auto row = logits.values().subspan((length - 1) * vocab, vocab);
        return {row.begin(), row.end()};
    };
    return greedy_decode(next, max_new_tokens, eos);
}

}  // namespace promptlab
