#pragma once

#include <json.hpp>

#include "promptlab/errors.hpp"
#include "promptlab/model.hpp"
#include "promptlab/trainer.hpp"

namespace promptlab::json_io {

using nlohmann::json;

template <typename T>
void read_optional(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

inline json to_json(const ModelConfig& c) {
    return {{"vocab_size", c.vocab_size},       {"d_model", c.d_model},
            {"n_layers", c.n_layers},           {"n_heads", c.n_heads},
            {"d_ff", c.d_ff},                   {"max_positions", c.max_positions},
            {"controller_layers", c.controller_layers},
            {"controller_heads", c.controller_heads},
            {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const json& j, ModelConfig c = {}) {
    read_optional(j, "vocab_size", c.vocab_size);
    read_optional(j, "d_model", c.d_model);
    read_optional(j, "n_layers", c.n_layers);
    read_optional(j, "n_heads", c.n_heads);
    read_optional(j, "d_ff", c.d_ff);
    read_optional(j, "max_positions", c.max_positions);
    read_optional(j, "controller_layers", c.controller_layers);
    read_optional(j, "controller_heads", c.controller_heads);
    read_optional(j, "seed", c.seed);
    return c;
}

inline json to_json(const TrainConfig& c) {
    return {{"batch_size", c.batch_size},
            {"max_epochs", c.max_epochs},
            {"patience_epochs", c.patience_epochs},
            {"eval_every", c.eval_every},
            {"selection_bleu_order", c.selection_bleu_order},
            {"max_new_tokens", c.max_new_tokens},
            {"clip_norm", c.clip_norm}};
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {}) {
    read_optional(j, "learning_rate", c.learning_rate);
    read_optional(j, "batch_size", c.batch_size);
    read_optional(j, "max_epochs", c.max_epochs);
    read_optional(j, "patience_epochs", c.patience_epochs);
    read_optional(j, "eval_every", c.eval_every);
    read_optional(j, "selection_bleu_order", c.selection_bleu_order);
    read_optional(j, "max_new_tokens", c.max_new_tokens);
    read_optional(j, "clip_norm", c.clip_norm);
    return c;
}

inline json to_json(const SweepConfig& c) {
    return {{"trials", c.trials}, {"lr_low", c.lr_low}, {"lr_high", c.lr_high}};
}

inline SweepConfig sweep_config_from_json(const json& j, SweepConfig c = {}) {
    read_optional(j, "trials", c.trials);
    read_optional(j, "lr_low", c.lr_low);
    read_optional(j, "lr_high", c.lr_high);
    read_optional(j, "workers", c.workers);
    return c;
}

}  // namespace promptlab::json_io
