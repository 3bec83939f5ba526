#pragma once

// Small models, pairs and corpora shared by unit and acceptance tests.

#include <filesystem>
#include <string>
#include <vector>

#include "promptlab/adaptation.hpp"
#include "promptlab/experiment.hpp"
#include "promptlab/model.hpp"
#include "promptlab/trainer.hpp"

namespace promptlab::testing {

/// d_model 16, 2 layers, 2 heads, d_ff 32, 64 positions, 1-layer controller.
ModelConfig tiny_config(std::size_t vocab = 24, std::uint64_t seed = 1);

/// Pair with ids drawn in [0, vocab).
DialogPair make_pair(std::size_t m, std::size_t response_len, std::size_t vocab,
                     std::uint64_t seed);

ModelState make_state(RegimeKind kind, const ModelConfig& config, std::size_t pool = 32,
                      std::uint64_t seed = 3);

/// Fresh empty directory under the system temp dir, unique per name.
std::filesystem::path scratch_dir(const std::string& name);

/// Experiment config over a synthetic corpus written into `dir`, sized for tests.
ExperimentConfig small_experiment(const std::filesystem::path& dir, std::size_t dialogs,
                                  std::uint64_t seed);

}  // namespace promptlab::testing
