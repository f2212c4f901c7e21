#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "s4al/losses.hpp"
#include "s4al/optimizer.hpp"
#include "s4al/segmodel.hpp"
#include "s4al/synthdata.hpp"

namespace s4al {

enum class Mode { active, ssl, supervised };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct DatasetConfig {
  std::uint64_t seed = 3;
  int n_train = 120;
  int n_val = 30;
  GenerationParams params;
  // Empty: generate in memory from the parameters above.
  std::string dir;

  bool operator==(const DatasetConfig&) const = default;
};

struct ScheduleConfig {
  int epochs = 20;
  int iters_per_epoch = 10;
  double final_epoch_multiplier = 1.5;
  int batch_labeled = 2;
  int batch_unlabeled = 4;
  bool reinit_each_cycle = false;

  bool operator==(const ScheduleConfig&) const = default;
};

struct ActiveConfig {
  double labeled_fraction = 0.10;
  double pseudo_threshold = 0.7;
  int region_size = 8;
  int per_image_budget = 4;
  int cycles = 2;
  int ssl_retrain_count = 2;

  bool operator==(const ActiveConfig&) const = default;
};

struct ExperimentConfig {
  std::string name = "s4al_plus";
  std::uint64_t seed = 1;
  Mode mode = Mode::active;
  std::string output_dir = "runs";
  bool write_snapshots = true;
  bool write_checkpoints = true;
  DatasetConfig dataset;
  ArchConfig model;  // num_classes follows dataset.params.num_classes
  OptimizerConfig optimizer;
  ScheduleConfig schedule;
  RecoConfig reco;
  ActiveConfig active;

  // Throws ConfigError.
  void validate() const;

  // Canonical JSON (sorted keys); parse(to_json()) == *this.
  std::string to_json(int indent = -1) const;
  // Unknown keys at any level are rejected; missing keys keep their defaults.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  // Git blob SHA-1 of the canonical JSON, hex encoded.
  std::string content_hash() const;

  ArchConfig arch() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// SHA-1 of "blob <size>\0<content>", as `git hash-object` computes it.
std::string git_blob_hash(const std::string& content);

}  // namespace s4al
