#include "promptlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "json_io.hpp"
#include "promptlab/errors.hpp"
#include "promptlab/optimizer.hpp"
#include "promptlab/seeding.hpp"

namespace promptlab {

namespace fs = std::filesystem;
using json_io::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

bool write_if_changed(const fs::path& path, std::string_view content) {
    if (fs::exists(path) && read_file(path) == content) return false;
    write_file(path, content);
    return true;
}

std::string format_number(const char* pattern, double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, pattern, value);
    return buffer;
}

std::string fraction_label(double fraction) { return format_number("%.2f", fraction); }

fs::path resolve(const fs::path& base, const fs::path& p) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return (base / p).lexically_normal();
}

CorpusSplit load_split(const ExperimentConfig& config) {
    return load_corpus(config.train_path, config.validation_path, config.test_path);
}

json row_to_json(const ReportRow& r) {
    return {{"regime", r.regime},
            {"fraction", r.fraction},
            {"status", r.ok ? "ok" : "failed"},
            {"error", r.error},
            {"BLEU1", r.metrics.bleu1},
            {"BLEU2", r.metrics.bleu2},
            {"BLEU3", r.metrics.bleu3},
            {"BLEU4", r.metrics.bleu4},
            {"Novelty", r.metrics.novelty},
            {"Diversity", r.metrics.diversity},
            {"best_learning_rate", r.best_learning_rate},
            {"epoch_of_best", r.epoch_of_best},
            {"best_val_bleu", r.best_val_bleu},
            {"train_pairs", r.train_pairs},
            {"validation_pairs", r.validation_pairs},
            {"test_pairs", r.test_pairs},
            {"seed", r.seed}};
}

ReportRow row_from_json(const json& j) {
    ReportRow r;
    r.regime = j.at("regime").get<std::string>();
    r.fraction = j.at("fraction").get<double>();
    r.ok = j.at("status").get<std::string>() == "ok";
    r.error = j.at("error").get<std::string>();
    r.metrics.bleu1 = j.at("BLEU1").get<double>();
    r.metrics.bleu2 = j.at("BLEU2").get<double>();
    r.metrics.bleu3 = j.at("BLEU3").get<double>();
    r.metrics.bleu4 = j.at("BLEU4").get<double>();
    r.metrics.novelty = j.at("Novelty").get<double>();
    r.metrics.diversity = j.at("Diversity").get<double>();
    r.best_learning_rate = j.at("best_learning_rate").get<double>();
    r.epoch_of_best = j.at("epoch_of_best").get<std::size_t>();
    r.best_val_bleu = j.at("best_val_bleu").get<double>();
    r.train_pairs = j.at("train_pairs").get<std::size_t>();
    r.validation_pairs = j.at("validation_pairs").get<std::size_t>();
    r.test_pairs = j.at("test_pairs").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
}

std::string hypotheses_text(const std::vector<std::string>& hypotheses) {
    std::string out;
    for (const auto& h : hypotheses) {
        out += h;
        out += '\n';
    }
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (train_path.empty() || validation_path.empty() || test_path.empty()) {
        throw ConfigError("corpus train/validation/test paths are required");
    }
    if (tokenizer_vocab < Tokenizer::kFirstMerge) {
        throw ConfigError("tokenizer_vocab must be at least " +
                          std::to_string(Tokenizer::kFirstMerge));
    }
    if (regimes.empty()) throw ConfigError("at least one regime is required");
    if (fractions.empty()) throw ConfigError("at least one fraction is required");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] > 0.0 && fractions[i] <= 1.0)) {
            throw ConfigError("fractions must lie in (0, 1]");
        }
        if (i > 0 && !(fractions[i - 1] < fractions[i])) {
            throw ConfigError("fractions must be strictly ascending");
        }
    }
    if (prompt_pool_capacity == 0) throw ConfigError("prompt_pool_capacity must be positive");
    if (pretrain.batch_size == 0) throw ConfigError("pretrain.batch_size must be positive");
    if (!(pretrain.learning_rate > 0.0)) {
        throw ConfigError("pretrain.learning_rate must be positive");
    }
    if (workers == 0) throw ConfigError("workers must be at least 1");
    train.validate();
    sweep.validate();
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    ExperimentConfig c;
    try {
        if (j.contains("corpus")) {
            const auto& corpus = j.at("corpus");
            c.train_path = corpus.value("train", std::string());
            c.validation_path = corpus.value("validation", std::string());
            c.test_path = corpus.value("test", std::string());
        }
        std::string output_dir = c.output_dir.string();
        json_io::read_optional(j, "output_dir", output_dir);
        c.output_dir = output_dir;
        json_io::read_optional(j, "tokenizer_vocab", c.tokenizer_vocab);
        if (j.contains("model")) c.model = json_io::model_config_from_json(j.at("model"));
        if (j.contains("pretrain")) {
            const auto& p = j.at("pretrain");
            json_io::read_optional(p, "steps", c.pretrain.steps);
            json_io::read_optional(p, "batch_size", c.pretrain.batch_size);
            json_io::read_optional(p, "learning_rate", c.pretrain.learning_rate);
            json_io::read_optional(p, "log_every", c.pretrain.log_every);
        }
        if (j.contains("train")) c.train = json_io::train_config_from_json(j.at("train"));
        if (j.contains("sweep")) c.sweep = json_io::sweep_config_from_json(j.at("sweep"));
        if (j.contains("regimes")) {
            c.regimes.clear();
            for (const auto& name : j.at("regimes")) {
                c.regimes.push_back(parse_regime_kind(name.get<std::string>()));
            }
        }
        json_io::read_optional(j, "fractions", c.fractions);
        json_io::read_optional(j, "prompt_pool_capacity", c.prompt_pool_capacity);
        json_io::read_optional(j, "seed", c.seed);
        json_io::read_optional(j, "workers", c.workers);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.train_path = resolve(base_dir, c.train_path);
    c.validation_path = resolve(base_dir, c.validation_path);
    c.test_path = resolve(base_dir, c.test_path);
    c.output_dir = resolve(base_dir, c.output_dir);
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str(), path.parent_path());
}

fs::path tokenizer_path(const ExperimentConfig& config) {
    return config.output_dir / "tokenizer.json";
}

fs::path base_checkpoint_path(const ExperimentConfig& config) {
    return config.output_dir / "base.ckpt";
}

fs::path report_path(const ExperimentConfig& config) { return config.output_dir / "report.json"; }

void write_synthetic_corpus(const fs::path& dir, std::size_t dialogs, std::uint64_t seed) {
    if (dialogs < 10) throw ConfigError("synthetic corpus needs at least 10 dialogs");
    const auto all = synthetic_dialogs(dialogs, seed);
    const std::size_t n_valid = dialogs / 10;
    const std::size_t n_test = dialogs / 10;
    const std::size_t n_train = dialogs - n_valid - n_test;
    const std::span<const Dialog> span(all);
    fs::create_directories(dir);
    write_dialogs(dir / "train.txt", span.first(n_train));
    write_dialogs(dir / "valid.txt", span.subspan(n_train, n_valid));
    write_dialogs(dir / "test.txt", span.subspan(n_train + n_valid));
}

Tokenizer cmd_prepare(const ExperimentConfig& config) {
    config.validate();
    const auto split = load_split(config);
    Tokenizer tokenizer = train_tokenizer(split.train, config.tokenizer_vocab);
    write_file(tokenizer_path(config), tokenizer.to_json());
    return tokenizer;
}

Tokenizer load_tokenizer(const fs::path& path) { return Tokenizer::from_json(read_file(path)); }

PretrainResult pretrain(const ExperimentConfig& config, const Tokenizer& tokenizer,
                        const CorpusSplit& corpus, const StepSink& sink) {
    ModelConfig model_config = config.model;
    model_config.vocab_size = tokenizer.vocab_size();
    model_config.seed = derive_seed(config.seed, "init");
    model_config.validate();

    auto keep_trainable = [](std::vector<std::vector<TokenId>> sequences) {
        std::erase_if(sequences, [](const auto& s) { return s.size() < 2; });
        return sequences;
    };
    const auto train = keep_trainable(encode_utterances(tokenizer, corpus.train));
    auto held_out = keep_trainable(encode_utterances(tokenizer, corpus.validation));
    if (train.empty()) throw EmptyInputError("pretrain: no training utterances");
    if (held_out.empty()) throw EmptyInputError("pretrain: no held-out utterances");
    if (held_out.size() > 256) held_out.resize(256);

    PretrainResult result{
        Checkpoint{ModelState{LanguageModel(model_config),
                              AdaptationRegime::create(RegimeKind::FineTune, model_config,
                                                       config.prompt_pool_capacity, 0)},
                   tokenizer, "{}"},
        0.0, 0.0, {}};
    LanguageModel& lm = result.checkpoint.state.lm;
    result.initial_perplexity = perplexity(lm, held_out);

    auto params = lm.parameters();
    for (auto& p : params) p.tensor.set_requires_grad(true);
    Adam optimizer(params, {config.pretrain.learning_rate, 0.9, 0.999, 1e-8, 1.0});
    std::mt19937_64 rng(derive_seed(config.seed, "pretrain"));
    const double inv_batch = 1.0 / static_cast<double>(config.pretrain.batch_size);
    for (std::size_t step = 1; step <= config.pretrain.steps; ++step) {
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < config.pretrain.batch_size; ++b) {
            Tensor loss;
            try {
                loss = language_model_loss(lm, train[rng() % train.size()]);
            } catch (const NumericError& e) {
                throw DivergenceError("pretrain: " + std::string(e.what()) + " at step " +
                                      std::to_string(step));
            }
            const double value = loss.item();
            if (!std::isfinite(value)) {
                throw DivergenceError("pretrain: non-finite loss at step " + std::to_string(step));
            }
            batch_loss += value * inv_batch;
            scale(loss, inv_batch).backward();
        }
        optimizer.step();
        result.loss_history.push_back(batch_loss);
        if (sink) sink(step, batch_loss);
    }
    result.final_perplexity = perplexity(lm, held_out);

    json meta{{"stage", "pretrain"},
              {"steps", config.pretrain.steps},
              {"initial_perplexity", result.initial_perplexity},
              {"final_perplexity", result.final_perplexity}};
    result.checkpoint.metadata = meta.dump();
    return result;
}

PretrainResult cmd_pretrain(const ExperimentConfig& config) {
    config.validate();
    const auto tokenizer = load_tokenizer(tokenizer_path(config));
    const auto split = load_split(config);
    std::string log;
    const std::size_t every = std::max<std::size_t>(1, config.pretrain.log_every);
    auto result = pretrain(config, tokenizer, split, [&](std::size_t step, double loss) {
        if (step % every == 0 || step == config.pretrain.steps) {
            log += json{{"step", step}, {"loss", loss}}.dump() + "\n";
        }
    });
    write_file(config.output_dir / "pretrain_log.jsonl", log);
    save_checkpoint(base_checkpoint_path(config), result.checkpoint);
    return result;
}

std::string ReportTable::to_json() const {
    json j;
    j["columns"] = {"BLEU1", "BLEU2", "BLEU3", "BLEU4", "Novelty", "Diversity"};
    j["rows"] = json::array();
    for (const auto& r : rows) j["rows"].push_back(row_to_json(r));
    return j.dump(2) + "\n";
}

ReportTable ReportTable::from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        ReportTable table;
        for (const auto& r : j.at("rows")) table.rows.push_back(row_from_json(r));
        return table;
    } catch (const json::exception& e) {
        throw FormatError(std::string("report: ") + e.what());
    }
}

ReportTable ReportTable::load(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("report not found: " + path.string());
    return from_json(read_file(path));
}

std::uint64_t cell_seed(std::uint64_t master, RegimeKind regime, double fraction) {
    return derive_seed(master, std::string(to_string(regime)) + "|" + fraction_label(fraction));
}

fs::path cell_directory(const ExperimentConfig& config, RegimeKind regime, double fraction) {
    return config.output_dir / "cells" /
           (std::string(to_string(regime)) + "_" + fraction_label(fraction));
}

std::vector<TextPair> usable_pairs(const Tokenizer& tokenizer, std::span<const TextPair> pairs,
                                   const ModelConfig& model, std::size_t pool_capacity) {
    std::vector<TextPair> out;
    for (const auto& pair : pairs) {
        const auto encoded = encode_pair(tokenizer, pair);
        const std::size_t m = encoded.query.size();
        if (m == 0 || encoded.response.size() < 2) continue;
        if (2 * m + 1 > model.max_positions || m > pool_capacity) continue;
        out.push_back(pair);
    }
    return out;
}

namespace {

struct GridInputs {
    const ExperimentConfig& config;
    const Checkpoint& base;
    CorpusSplit corpus;  // filtered, full-size
    ResponseSet training_responses;
};

ReportRow run_cell(const GridInputs& in, RegimeKind regime, double fraction) {
    const auto& config = in.config;
    const fs::path dir = cell_directory(config, regime, fraction);
    fs::create_directories(dir);

    ReportRow row;
    row.regime = std::string(to_string(regime));
    row.fraction = fraction;
    row.seed = cell_seed(config.seed, regime, fraction);
    row.validation_pairs = in.corpus.validation.size();
    row.test_pairs = in.corpus.test.size();

    const auto subset = with_fraction(in.corpus, fraction, derive_seed(row.seed, "subsample"));
    row.train_pairs = subset.train.size();
    const auto data = make_training_data(in.base.tokenizer, subset.train, subset.validation);

    const ModelConfig& model_config = in.base.state.lm.config();
    const std::uint64_t regime_seed = derive_seed(row.seed, "regime");
    const ModelFactory factory = [&] {
        return ModelState{in.base.state.lm.clone(),
                          AdaptationRegime::create(regime, model_config,
                                                   config.prompt_pool_capacity, regime_seed)};
    };
    TrainConfig train_config = config.train;
    train_config.seed = derive_seed(row.seed, "train");
    SweepConfig sweep_config = config.sweep;
    sweep_config.workers = 1;

    std::vector<std::string> logs(sweep_config.trials);
    const TrialSinkFactory sinks = [&](std::size_t trial, double lr) -> ProgressSink {
        return [&logs, trial, lr](const EpochRecord& r) {
            json line{{"trial", trial}, {"learning_rate", lr}, {"epoch", r.epoch},
                      {"train_loss", r.train_loss}};
            line["val_bleu"] = r.val_bleu ? json(*r.val_bleu) : json(nullptr);
            logs[trial] += line.dump() + "\n";
        };
    };

    std::string trials_csv = "trial,learning_rate,status,best_val_bleu,epoch_of_best,epochs_run\n";
    try {
        auto result = sweep(factory, data, train_config, sweep_config, sinks);
        for (std::size_t i = 0; i < result.trials.size(); ++i) {
            const auto& t = result.trials[i];
            trials_csv += std::to_string(i) + "," + format_number("%.9g", t.learning_rate) + "," +
                          (t.ok ? "ok" : "diverged") + "," +
                          format_number("%.9g", t.best_val_bleu) + "," +
                          std::to_string(t.epoch_of_best) + "," + std::to_string(t.epochs_run) +
                          "\n";
        }
        const auto& best = result.best.best;
        const auto evaluation =
            evaluate(best.regime, best.lm, in.base.tokenizer, in.corpus.test,
                     in.training_responses, config.train.max_new_tokens);
        row.metrics = evaluation.row;
        row.best_learning_rate = result.best_learning_rate;
        row.epoch_of_best = result.best.epoch_of_best;
        row.best_val_bleu = result.best.best_val_bleu;

        json meta{{"stage", "adapt"},
                  {"regime", row.regime},
                  {"fraction", fraction},
                  {"learning_rate", row.best_learning_rate},
                  {"epoch_of_best", row.epoch_of_best}};
        save_checkpoint(dir / "best.ckpt", Checkpoint{best.clone(), in.base.tokenizer, meta.dump()});
        write_file(dir / "hypotheses.txt", hypotheses_text(evaluation.hypotheses));
    } catch (const SweepError& e) {
        row.ok = false;
        row.error = e.what();
    }
    for (std::size_t i = 0; i < logs.size(); ++i) {
        write_file(dir / ("trial_" + std::to_string(i) + ".jsonl"), logs[i]);
    }
    write_file(dir / "trials.csv", trials_csv);
    write_file(dir / "row.json", row_to_json(row).dump(2) + "\n");
    return row;
}

}  // namespace

ReportTable cmd_run_grid(const ExperimentConfig& config, const CellSink& sink) {
    config.validate();
    const Checkpoint base = load_checkpoint(base_checkpoint_path(config));
    const auto full = load_split(config);

    GridInputs inputs{config, base, {}, training_response_set(full.train)};
    const auto& model_config = base.state.lm.config();
    inputs.corpus.train =
        usable_pairs(base.tokenizer, full.train, model_config, config.prompt_pool_capacity);
    inputs.corpus.validation =
        usable_pairs(base.tokenizer, full.validation, model_config, config.prompt_pool_capacity);
    inputs.corpus.test =
        usable_pairs(base.tokenizer, full.test, model_config, config.prompt_pool_capacity);
    if (inputs.corpus.train.empty() || inputs.corpus.validation.empty() ||
        inputs.corpus.test.empty()) {
        throw EmptyInputError("grid: a corpus split has no usable pairs");
    }

    struct Cell {
        RegimeKind regime;
        double fraction;
    };
    std::vector<Cell> cells;
    for (auto regime : config.regimes) {
        for (double fraction : config.fractions) cells.push_back({regime, fraction});
    }

    ReportTable table;
    table.rows.resize(cells.size());
    std::vector<std::exception_ptr> failures(cells.size());
    std::mutex sink_mutex;
    auto run = [&](std::size_t i) {
        try {
            const fs::path marker = cell_directory(config, cells[i].regime, cells[i].fraction) /
                                    "row.json";
            bool resumed = false;
            if (fs::exists(marker)) {
                table.rows[i] = row_from_json(json::parse(read_file(marker)));
                resumed = true;
            } else {
                table.rows[i] = run_cell(inputs, cells[i].regime, cells[i].fraction);
            }
            if (sink) {
                std::lock_guard lock(sink_mutex);
                sink(table.rows[i], resumed);
            }
        } catch (...) {
            failures[i] = std::current_exception();
        }
    };

    const std::size_t workers = std::min(config.workers, cells.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run(i);
            });
        }
    }
    for (const auto& failure : failures) {
        if (failure) std::rethrow_exception(failure);
    }
    write_if_changed(report_path(config), table.to_json());
    return table;
}

std::string report_csv(const ReportTable& table) {
    std::string out =
        "regime,fraction,BLEU1,BLEU2,BLEU3,BLEU4,Novelty,Diversity,best_learning_rate,"
        "epoch_of_best,best_val_bleu,train_pairs,validation_pairs,test_pairs,status\n";
    for (const auto& r : table.rows) {
        out += r.regime + "," + fraction_label(r.fraction);
        for (double v : {r.metrics.bleu1, r.metrics.bleu2, r.metrics.bleu3, r.metrics.bleu4,
                         r.metrics.novelty, r.metrics.diversity}) {
            out += "," + format_number("%.6f", v);
        }
        out += "," + format_number("%.6g", r.best_learning_rate) + "," +
               std::to_string(r.epoch_of_best) + "," + format_number("%.6f", r.best_val_bleu) +
               "," + std::to_string(r.train_pairs) + "," + std::to_string(r.validation_pairs) +
               "," + std::to_string(r.test_pairs) + "," + (r.ok ? "ok" : "failed") + "\n";
    }
    return out;
}

std::string plot_data_csv(const ReportTable& table) {
    struct Metric {
        const char* name;
        double MetricRow::*field;
    };
    static constexpr Metric metrics[] = {
        {"BLEU1", &MetricRow::bleu1},     {"BLEU2", &MetricRow::bleu2},
        {"BLEU3", &MetricRow::bleu3},     {"BLEU4", &MetricRow::bleu4},
        {"Novelty", &MetricRow::novelty}, {"Diversity", &MetricRow::diversity},
    };
    std::vector<std::string> regimes;
    for (const auto& r : table.rows) {
        if (std::find(regimes.begin(), regimes.end(), r.regime) == regimes.end()) {
            regimes.push_back(r.regime);
        }
    }
    std::string out = "metric,regime,fraction,value\n";
    for (const auto& metric : metrics) {
        for (const auto& regime : regimes) {
            std::vector<const ReportRow*> series;
            for (const auto& r : table.rows) {
                if (r.regime == regime && r.ok) series.push_back(&r);
            }
            std::stable_sort(series.begin(), series.end(),
                             [](const auto* a, const auto* b) { return a->fraction < b->fraction; });
            for (const auto* r : series) {
                out += std::string(metric.name) + "," + regime + "," +
                       fraction_label(r->fraction) + "," +
                       format_number("%.6f", r->metrics.*metric.field) + "\n";
            }
        }
    }
    return out;
}

void cmd_export(const fs::path& report, const fs::path& out_dir) {
    const auto table = ReportTable::load(report);
    if (table.rows.empty()) throw FormatError("report has no rows: " + report.string());
    const std::string csv = report_csv(table);
    const std::string plot = plot_data_csv(table);
    write_file(out_dir / "report.csv", csv);
    write_file(out_dir / "plot_data.csv", plot);
}

Evaluation cmd_evaluate(const ExperimentConfig& config, const Checkpoint& checkpoint) {
    const auto full = load_split(config);
    const auto test = usable_pairs(checkpoint.tokenizer, full.test, checkpoint.state.lm.config(),
                                   config.prompt_pool_capacity);
    if (test.empty()) throw EmptyInputError("evaluate: no usable test pairs");
    return evaluate(checkpoint.state.regime, checkpoint.state.lm, checkpoint.tokenizer, test,
                    training_response_set(full.train), config.train.max_new_tokens);
}

int chat_session(const Checkpoint& checkpoint, std::istream& in, std::ostream& out,
                 std::size_t max_new_tokens, bool show_prompt) {
    const auto& state = checkpoint.state;
    std::string line;
    while (true) {
        if (show_prompt) out << "> " << std::flush;
        if (!std::getline(in, line)) break;
        const std::string query = normalize_whitespace(line);
        if (query.empty()) continue;
        try {
            const auto ids = checkpoint.tokenizer.encode(query);
            const auto response = greedy_decode(state.regime, state.lm, ids, max_new_tokens);
            out << checkpoint.tokenizer.decode(response) << "\n";
        } catch (const CapacityError& e) {
            out << "[input too long: " << e.what() << "]\n";
        }
    }
    if (show_prompt) out << "\n";
    return 0;
}

}  // namespace promptlab
