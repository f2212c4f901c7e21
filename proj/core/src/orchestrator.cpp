#include "s4al/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>

#include <json.hpp>

#include "s4al/augment.hpp"
#include "s4al/checkpoint.hpp"
#include "s4al/errors.hpp"
#include "s4al/losses.hpp"
#include "s4al/optimizer.hpp"

namespace s4al {
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.8f", v);
  return buf;
}

std::string fmt_opt(std::optional<double> v) { return v ? fmt(*v) : std::string("nan"); }

std::ofstream open_csv(const fs::path& path, const std::string& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << header << '\n';
  out.flush();
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool pseudo_or_queried(Provenance p) { return p == Provenance::pseudo || p == Provenance::queried; }

}  // namespace

RunWriter::RunWriter(fs::path run_dir, int num_classes) : dir_(std::move(run_dir)), num_classes_(num_classes) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw DataError("cannot create run directory " + dir_.string() + ": " + ec.message());
  std::string header = "cycle,human_fraction,pseudo_fraction,pseudo_precision,miou";
  for (int c = 0; c < num_classes; ++c) header += ",iou_" + std::to_string(c);
  header += ",seconds";
  reports_ = open_csv(dir_ / "reports.csv", header);
  queries_ = open_csv(dir_ / "queries.csv", "cycle,image_id,tile_row,tile_col,score");
  ledger_ = open_csv(dir_ / "ledger.csv", "cycle,human_fraction,pseudo_fraction,pseudo_precision");
  metrics_ = open_csv(dir_ / "metrics.csv", "cycle,class_id,iou");
}

fs::path RunWriter::cycle_dir(int cycle) const { return dir_ / ("cycle" + std::to_string(cycle)); }

void RunWriter::report(const CycleReport& r) {
  reports_ << r.cycle << ',' << fmt(r.human_fraction) << ',' << fmt(r.pseudo_fraction) << ','
           << fmt_opt(r.pseudo_precision) << ',' << fmt(r.miou);
  for (int c = 0; c < num_classes_; ++c) reports_ << ',' << fmt(c < static_cast<int>(r.class_iou.size()) ? r.class_iou[c] : std::numeric_limits<double>::quiet_NaN());
  char secs[32];
  std::snprintf(secs, sizeof(secs), "%.3f", r.seconds);
  reports_ << ',' << secs << '\n';
  reports_.flush();
}

void RunWriter::queries(int cycle, const std::vector<RegionQuery>& q) {
  for (const auto& r : q)
    queries_ << cycle << ',' << r.image << ',' << r.tile.row << ',' << r.tile.col << ',' << fmt(r.score) << '\n';
  queries_.flush();
}

void RunWriter::ledger(int cycle, const BudgetLedger& l, std::optional<double> precision) {
  ledger_ << cycle << ',' << fmt(l.human_fraction()) << ',' << fmt(l.pseudo_fraction()) << ',' << fmt_opt(precision)
          << '\n';
  ledger_.flush();
}

void RunWriter::metrics(int cycle, const IouResult& r) {
  for (std::size_t c = 0; c < r.per_class.size(); ++c) metrics_ << cycle << ',' << c << ',' << fmt(r.per_class[c]) << '\n';
  metrics_ << cycle << ",mIoU," << fmt(r.mean) << '\n';
  metrics_.flush();
}

Experiment::Experiment(ExperimentConfig cfg, Dataset dataset) : cfg_(std::move(cfg)), dataset_(std::move(dataset)) {
  cfg_.validate();
  const auto& m = dataset_.manifest;
  if (m.params.height != cfg_.dataset.params.height || m.params.width != cfg_.dataset.params.width ||
      m.params.num_classes != cfg_.dataset.params.num_classes)
    throw ConfigError("dataset does not match the configured dimensions or class count");
  for (int k = 0; k < m.n_train; ++k) oracle_.push_back(dataset_.train(k).labels);
  pool_ = LabelPool::init(oracle_, cfg_.active.labeled_fraction, derive_seed(cfg_.seed, {0x9001ULL}));
  model_ = init_model(derive_seed(cfg_.seed, {0x1417ULL}), cfg_.arch());
}

PhaseStats Experiment::train_phase(int cycle, int epochs) {
  const auto& sch = cfg_.schedule;
  const long total = static_cast<long>(epochs) * sch.iters_per_epoch;
  // The stream depends only on (seed, cycle) so runs that differ only in
  // their unlabelled data follow the same labelled trajectory.
  Rng rng(derive_seed(cfg_.seed, {0x7a11ULL, static_cast<std::uint64_t>(cycle)}));
  SgdMomentum opt(model_, cfg_.optimizer);

  const auto labeled = pool_.labeled_images();
  std::vector<int> unlabeled;
  if (cfg_.mode != Mode::supervised && sch.batch_unlabeled > 0)
    for (int u : pool_.unlabeled_images())
      if (pool_.has_any_label(u)) unlabeled.push_back(u);
  if (labeled.empty()) throw ConfigError("train_phase: no labelled images");

  PhaseStats stats;
  stats.iterations = total;
  stats.used_unlabeled = !unlabeled.empty();
  ModelParams grads = model_.zeros_like();
  std::vector<ForwardPass> passes;
  std::vector<LogitMap> logits;
  std::vector<EmbeddingMap> embs;
  std::vector<LabelMap> masks;

  for (long it = 0; it < total; ++it) {
    passes.clear();
    logits.clear();
    embs.clear();
    masks.clear();
    auto add = [&](const SceneImage& img, const LabelMap& supervision, AugmentMode mode) {
      auto aug = augment(img, supervision, mode, rng);
      passes.push_back(forward(model_, aug.image, /*noise=*/true, &rng));
      logits.push_back(passes.back().logits);
      embs.push_back(passes.back().embeddings);
      masks.push_back(std::move(aug.labels));
    };
    for (int b = 0; b < sch.batch_labeled; ++b) {
      const int id = labeled[rng.index(labeled.size())];
      add(dataset_.train(id).image, pool_.effective(id), AugmentMode::weak);
    }
    if (!unlabeled.empty()) {
      for (int b = 0; b < sch.batch_unlabeled; ++b) {
        const int id = unlabeled[rng.index(unlabeled.size())];
        add(dataset_.train(id).image, pool_.effective_where(id, pseudo_or_queried), AugmentMode::strong);
      }
    }

    const LogitMap batch_logits = stack_rows(std::span<const LogitMap>(logits));
    const EmbeddingMap batch_emb = stack_rows(std::span<const EmbeddingMap>(embs));
    const LabelMap batch_mask = stack_rows(std::span<const LabelMap>(masks));
    const ProbMap probs = softmax_probs(batch_logits);
    auto loss = total_loss(batch_logits, batch_emb, batch_mask, probs, cfg_.reco, rng);
    if (!std::isfinite(loss.value))
      throw NumericalError("non-finite loss at cycle " + std::to_string(cycle) + ", iteration " + std::to_string(it));
    if (it == 0) {
      stats.first_loss = loss.value;
      stats.first_cross_entropy = loss.cross_entropy;
      stats.first_reco = loss.reco;
    }
    stats.last_loss = loss.value;

    grads.fill(0.0);
    int row = 0;
    for (const auto& pass : passes) {
      const int h = pass.logits.height;
      backward(model_, pass, slice_rows(loss.dlogits, row, h), slice_rows(loss.dembeddings, row, h), grads);
      row += h;
    }
    opt.step(model_, grads, poly_learning_rate(cfg_.optimizer.learning_rate, it, total, cfg_.optimizer.poly_power));
    if (!model_.all_finite())
      throw NumericalError("non-finite parameters at cycle " + std::to_string(cycle) + ", iteration " + std::to_string(it));
  }
  ++training_phases_;
  return stats;
}

std::vector<RegionQuery> Experiment::pseudo_and_query_phase(bool reveal) {
  const int r = cfg_.active.region_size;
  std::vector<ScoredGrid> grids;
  for (int u : pool_.unlabeled_images()) {
    const auto probs = softmax_probs(forward(model_, dataset_.train(u).image, /*noise=*/false).logits);
    pool_.assign_pseudo(u, probs, cfg_.active.pseudo_threshold);
    if (!reveal) continue;
    auto grid = RegionGrid::make(pool_.height(), pool_.width(), r);
    grid.mark_eligibility(pool_.provenance(u), pool_.width());
    grids.push_back({u, score_regions(pixel_entropy(probs), std::move(grid))});
  }
  if (!reveal) return {};
  auto queries = select_regions(grids, cfg_.active.per_image_budget);
  for (const auto& q : queries) pool_.reveal({q.image, q.tile}, r, oracle_[q.image]);
  ++reveal_calls_;
  return queries;
}

IouResult Experiment::evaluate() const {
  ConfusionMatrix cm(cfg_.dataset.params.num_classes);
  for (int k = 0; k < dataset_.manifest.n_val; ++k) {
    const auto& scene = dataset_.val(k);
    cm.accumulate(predict(model_, scene.image), scene.labels);
  }
  return iou(cm);
}

int Experiment::final_epochs() const {
  return std::max(1, static_cast<int>(std::lround(cfg_.schedule.epochs * cfg_.schedule.final_epoch_multiplier)));
}

CycleReport Experiment::finish_cycle(int cycle, double seconds, RunWriter* writer) {
  const auto ledger = pool_.ledger();
  const auto precision = pool_.pseudo_precision(oracle_);
  const auto scores = evaluate();
  CycleReport r{cycle, ledger.human_fraction(), ledger.pseudo_fraction(), precision, scores.mean, scores.per_class,
                seconds};
  if (writer) {
    writer->ledger(cycle, ledger, precision);
    writer->metrics(cycle, scores);
    writer->report(r);
    const auto dir = writer->cycle_dir(cycle);
    if (cfg_.write_checkpoints || cfg_.write_snapshots) fs::create_directories(dir);
    if (cfg_.write_checkpoints) save_checkpoint(dir / "model.ckpt", model_, cfg_.to_json());
    if (cfg_.write_snapshots) pool_.write_snapshot(dir / "pool");
  }
  return r;
}

std::vector<CycleReport> Experiment::run(RunWriter* writer) {
  using clock = std::chrono::steady_clock;
  std::vector<CycleReport> reports;
  int phases = 1;
  if (cfg_.mode == Mode::active) phases = cfg_.active.cycles + 1;
  if (cfg_.mode == Mode::ssl) phases = cfg_.active.ssl_retrain_count + 1;

  for (int cycle = 0; cycle < phases; ++cycle) {
    const auto start = clock::now();
    const bool last = cycle == phases - 1;
    if (cycle > 0 && cfg_.schedule.reinit_each_cycle)
      model_ = init_model(derive_seed(cfg_.seed, {0x1417ULL, static_cast<std::uint64_t>(cycle)}), cfg_.arch());
    try {
      train_phase(cycle, last ? final_epochs() : cfg_.schedule.epochs);
    } catch (const NumericalError&) {
      if (writer) {
        fs::create_directories(writer->cycle_dir(cycle));
        save_checkpoint(writer->cycle_dir(cycle) / "diverged.ckpt", model_, cfg_.to_json());
      }
      throw;
    }
    const double seconds = std::chrono::duration<double>(clock::now() - start).count();
    reports.push_back(finish_cycle(cycle, seconds, writer));
    if (last) break;
    // The student that just finished becomes the teacher for the next cycle.
    auto queries = pseudo_and_query_phase(cfg_.mode == Mode::active);
    if (writer && cfg_.mode == Mode::active) writer->queries(cycle, queries);
  }
  return reports;
}

Dataset load_or_generate_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.dir.empty())
    return generate_dataset(cfg.dataset.seed, cfg.dataset.n_train, cfg.dataset.n_val, cfg.dataset.params);
  if (!fs::exists(fs::path(cfg.dataset.dir) / "manifest.json"))
    throw DataError("dataset not found at " + cfg.dataset.dir + " (run `s4al generate` first)");
  return load_dataset(cfg.dataset.dir);
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunResult result;
  result.run_dir = fs::path(cfg.output_dir) / cfg.name;
  const std::string started = utc_timestamp();
  std::string status = "completed";
  std::string error;

  auto write_manifest = [&] {
    nlohmann::ordered_json m;
    m["name"] = cfg.name;
    m["config"] = nlohmann::json::parse(cfg.to_json());
    m["config_hash"] = cfg.content_hash();
    m["started_at"] = started;
    m["finished_at"] = utc_timestamp();
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    m["cycles_completed"] = result.reports.size();
    std::vector<std::string> artifacts = {"reports.csv", "queries.csv", "ledger.csv", "metrics.csv"};
    for (std::size_t c = 0; c < result.reports.size(); ++c) {
      const std::string dir = "cycle" + std::to_string(c);
      if (cfg.write_checkpoints) artifacts.push_back(dir + "/model.ckpt");
      if (cfg.write_snapshots) artifacts.push_back(dir + "/pool");
    }
    m["artifacts"] = artifacts;
    const auto tmp = result.run_dir / "run_manifest.json.tmp";
    {
      std::ofstream out(tmp);
      out << m.dump(2) << '\n';
      if (!out) throw DataError("cannot write run manifest");
    }
    fs::rename(tmp, result.run_dir / "run_manifest.json");
  };

  RunWriter writer(result.run_dir, cfg.dataset.params.num_classes);
  try {
    Experiment exp(cfg, load_or_generate_dataset(cfg));
    result.reports = exp.run(&writer);
  } catch (const std::exception& e) {
    status = "failed";
    error = e.what();
    // Recover the rows already flushed for the manifest's cycle count.
    std::ifstream in(result.run_dir / "reports.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line))
      if (!line.empty()) result.reports.push_back({});
    write_manifest();
    throw;
  }
  write_manifest();
  return result;
}

}  // namespace s4al
