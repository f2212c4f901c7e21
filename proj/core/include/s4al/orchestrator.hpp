#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "s4al/alquery.hpp"
#include "s4al/config.hpp"
#include "s4al/labelpool.hpp"
#include "s4al/metrics.hpp"
#include "s4al/segmodel.hpp"
#include "s4al/synthdata.hpp"

namespace s4al {

struct CycleReport {
  int cycle = 0;
  double human_fraction = 0.0;
  double pseudo_fraction = 0.0;
  std::optional<double> pseudo_precision;
  double miou = 0.0;
  std::vector<double> class_iou;
  double seconds = 0.0;
};

struct PhaseStats {
  long iterations = 0;
  // Loss terms of the very first iteration, before any update.
  double first_loss = 0.0;
  double first_cross_entropy = 0.0;
  double first_reco = 0.0;
  double last_loss = 0.0;
  bool used_unlabeled = false;
};

// Appends to reports.csv, queries.csv, ledger.csv and metrics.csv under the
// run directory, flushing after every row so an aborted run keeps its
// completed cycles. Also owns per-cycle checkpoints and pool snapshots.
class RunWriter {
 public:
  RunWriter(std::filesystem::path run_dir, int num_classes);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path cycle_dir(int cycle) const;

  void report(const CycleReport& r);
  void queries(int cycle, const std::vector<RegionQuery>& q);
  void ledger(int cycle, const BudgetLedger& l, std::optional<double> precision);
  void metrics(int cycle, const IouResult& r);

 private:
  std::filesystem::path dir_;
  int num_classes_;
  std::ofstream reports_, queries_, ledger_, metrics_;
};

// One experiment: dataset, label pool, model, and the cycle loop.
//   active:     AL_C + 1 training cycles; after each but the last, teacher
//               inference assigns pseudo-labels and reveals queried regions.
//   ssl:        1 + ssl_retrain_count training phases with pseudo-labelling
//               in between and no queries.
//   supervised: a single training phase on the initial labelled images.
// The final training phase of every mode runs epochs * final_epoch_multiplier.
class Experiment {
 public:
  Experiment(ExperimentConfig cfg, Dataset dataset);

  const ExperimentConfig& config() const { return cfg_; }
  const Dataset& dataset() const { return dataset_; }
  const LabelPool& pool() const { return pool_; }
  LabelPool& pool() { return pool_; }
  const ModelParams& model() const { return model_; }
  ModelParams& model() { return model_; }
  const std::vector<LabelMap>& oracle() const { return oracle_; }

  int training_phases() const { return training_phases_; }
  int reveal_calls() const { return reveal_calls_; }

  // One student training phase of `epochs * iters_per_epoch` SGD iterations
  // with a fresh optimiser and poly schedule. Throws NumericalError on a
  // non-finite loss.
  PhaseStats train_phase(int cycle, int epochs);

  // Noise-free teacher pass over D_U: pseudo-labels, and (when `reveal`)
  // per-image entropy region selection followed by oracle reveal.
  std::vector<RegionQuery> pseudo_and_query_phase(bool reveal);

  IouResult evaluate() const;

  std::vector<CycleReport> run(RunWriter* writer = nullptr);

 private:
  int final_epochs() const;
  CycleReport finish_cycle(int cycle, double seconds, RunWriter* writer);

  ExperimentConfig cfg_;
  Dataset dataset_;
  std::vector<LabelMap> oracle_;  // train ground truth, pool-indexed
  LabelPool pool_;
  ModelParams model_;
  int training_phases_ = 0;
  int reveal_calls_ = 0;
};

Dataset load_or_generate_dataset(const ExperimentConfig& cfg);

struct RunResult {
  std::filesystem::path run_dir;
  std::vector<CycleReport> reports;
};

// Runs the experiment under <output_dir>/<name>/, writing every CSV, the
// per-cycle checkpoints and run_manifest.json (written atomically at the end,
// also on failure, then the error is rethrown).
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace s4al
