#pragma once

// Versioned binary checkpoints: a JSON header (model config, regime, tokenizer,
// tensor table, free-form metadata) followed by raw little-endian doubles.

#include <filesystem>
#include <string>

#include "promptlab/tokenizer.hpp"
#include "promptlab/trainer.hpp"

namespace promptlab {

struct Checkpoint {
    ModelState state;
    Tokenizer tokenizer;
    /// JSON object text carried through unchanged.
    std::string metadata = "{}";
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& checkpoint);
/// Throws FormatError on a malformed or mismatched payload.
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Writes atomically through a temporary sibling file.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace promptlab
