// promptlab command-line front end.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "promptlab/checkpoint.hpp"
#include "promptlab/errors.hpp"
#include "promptlab/experiment.hpp"

namespace {

using promptlab::Error;

int exit_code(Error::Category category) {
    switch (category) {
        case Error::Category::Config: return 2;
        case Error::Category::Io: return 3;
        case Error::Category::Divergence: return 4;
        case Error::Category::Capacity:
        case Error::Category::Input: return 5;
        case Error::Category::Internal: return 1;
    }
    return 1;
}

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> workers;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("-c,--config", opts.config, "Experiment config (JSON)")->required();
    cmd->add_option("--seed", opts.seed, "Override the master seed");
    cmd->add_option("-o,--out", opts.out, "Override the output directory");
    cmd->add_option("-j,--workers", opts.workers, "Grid cells run concurrently");
}

promptlab::ExperimentConfig load_config(const CommonOptions& opts) {
    auto config = promptlab::ExperimentConfig::load(opts.config);
    if (opts.seed) config.seed = *opts.seed;
    if (opts.out) config.output_dir = *opts.out;
    if (opts.workers) config.workers = *opts.workers;
    config.validate();
    return config;
}

void print_row(const promptlab::MetricRow& row) {
    std::printf("BLEU1 %.4f  BLEU2 %.4f  BLEU3 %.4f  BLEU4 %.4f  Novelty %.4f  Diversity %.4f\n",
                row.bleu1, row.bleu2, row.bleu3, row.bleu4, row.novelty, row.diversity);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"promptlab: prompt-based adaptation of a small dialog language model"};
    app.require_subcommand(1);

    std::string synth_dir;
    std::size_t synth_count = 1000;
    std::uint64_t synth_seed = 0;
    auto* synth = app.add_subcommand("synth", "Write a synthetic dialog corpus");
    synth->add_option("-o,--out", synth_dir, "Output directory")->required();
    synth->add_option("-n,--dialogs", synth_count, "Number of dialogs");
    synth->add_option("--seed", synth_seed, "Generator seed");

    CommonOptions prepare_opts, pretrain_opts, grid_opts, eval_opts, export_opts;
    auto* prepare = app.add_subcommand("prepare", "Train the tokenizer on the training split");
    add_common(prepare, prepare_opts);
    auto* pretrain = app.add_subcommand("pretrain", "Pre-train the base language model");
    add_common(pretrain, pretrain_opts);
    auto* grid = app.add_subcommand("run-grid", "Run the regime x fraction grid");
    add_common(grid, grid_opts);

    std::string eval_checkpoint;
    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
    add_common(evaluate, eval_opts);
    evaluate->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();

    std::string export_report;
    auto* export_cmd = app.add_subcommand("export", "Write report.csv and plot_data.csv");
    export_cmd->add_option("--report", export_report, "report.json to export");
    export_cmd->add_option("-c,--config", export_opts.config, "Experiment config (JSON)");
    export_cmd->add_option("-o,--out", export_opts.out, "Output directory");

    std::string chat_checkpoint;
    std::size_t chat_max_tokens = 32;
    auto* chat = app.add_subcommand("chat", "Interactive greedy chat over a checkpoint");
    chat->add_option("--checkpoint", chat_checkpoint, "Checkpoint file")->required();
    chat->add_option("--max-new-tokens", chat_max_tokens, "Response length cap");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            promptlab::write_synthetic_corpus(synth_dir, synth_count, synth_seed);
            std::printf("wrote %zu dialogs to %s\n", synth_count, synth_dir.c_str());
        } else if (*prepare) {
            const auto config = load_config(prepare_opts);
            const auto tokenizer = promptlab::cmd_prepare(config);
            std::printf("tokenizer: %zu ids -> %s\n", tokenizer.vocab_size(),
                        promptlab::tokenizer_path(config).string().c_str());
        } else if (*pretrain) {
            const auto config = load_config(pretrain_opts);
            const auto result = promptlab::cmd_pretrain(config);
            std::printf("perplexity %.3f -> %.3f; base checkpoint %s\n", result.initial_perplexity,
                        result.final_perplexity,
                        promptlab::base_checkpoint_path(config).string().c_str());
        } else if (*grid) {
            const auto config = load_config(grid_opts);
            const auto table = promptlab::cmd_run_grid(
                config, [](const promptlab::ReportRow& row, bool resumed) {
                    std::printf("%-15s %.2f %s ", row.regime.c_str(), row.fraction,
                                resumed ? "(resumed)" : "         ");
                    if (row.ok) {
                        print_row(row.metrics);
                    } else {
                        std::printf("FAILED: %s\n", row.error.c_str());
                    }
                    std::fflush(stdout);
                });
            std::printf("%zu rows -> %s\n", table.rows.size(),
                        promptlab::report_path(config).string().c_str());
        } else if (*evaluate) {
            const auto config = load_config(eval_opts);
            const auto checkpoint = promptlab::load_checkpoint(eval_checkpoint);
            print_row(promptlab::cmd_evaluate(config, checkpoint).row);
        } else if (*export_cmd) {
            std::filesystem::path report = export_report;
            std::filesystem::path out_dir = export_opts.out.value_or("");
            if (!export_opts.config.empty()) {
                const auto config = promptlab::ExperimentConfig::load(export_opts.config);
                if (report.empty()) report = promptlab::report_path(config);
                if (out_dir.empty()) out_dir = config.output_dir;
            }
            if (report.empty()) throw promptlab::ConfigError("export needs --report or --config");
            if (out_dir.empty()) out_dir = report.parent_path();
            promptlab::cmd_export(report, out_dir);
            std::printf("wrote %s and %s\n", (out_dir / "report.csv").string().c_str(),
                        (out_dir / "plot_data.csv").string().c_str());
        } else if (*chat) {
            const auto checkpoint = promptlab::load_checkpoint(chat_checkpoint);
            return promptlab::chat_session(checkpoint, std::cin, std::cout, chat_max_tokens);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
