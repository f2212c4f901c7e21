#pragma once

#include <filesystem>
#include <string>

#include "s4al/segmodel.hpp"

namespace s4al {

// Binary checkpoint, little-endian; layout documented in docs/checkpoint-format.md.
// `config_echo` is stored verbatim (typically the experiment config as JSON).
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const std::string& config_echo);

struct Checkpoint {
  ModelParams params;
  std::string config_echo;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace s4al
