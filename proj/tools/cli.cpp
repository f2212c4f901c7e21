#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <ostream>
#include <sstream>

#include "s4al/errors.hpp"
#include "s4al/orchestrator.hpp"
#include "s4al/report.hpp"
#include "s4al/synthdata.hpp"

namespace s4al {
namespace fs = std::filesystem;

namespace {

int cmd_generate(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  const auto cfg = ExperimentConfig::load(config_path);
  fs::path dir = out_dir.empty() ? fs::path(cfg.dataset.dir) : fs::path(out_dir);
  if (dir.empty()) dir = "data";
  const auto dataset =
      generate_dataset(cfg.dataset.seed, cfg.dataset.n_train, cfg.dataset.n_val, cfg.dataset.params);
  out << write_dataset(dataset, dir).string() << '\n';
  return kExitOk;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const std::vector<std::uint64_t>& seeds,
            std::ostream& out) {
  auto cfg = ExperimentConfig::load(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (seeds.empty()) {
    const auto r = run_experiment(cfg);
    out << r.run_dir.string() << '\n';
    return kExitOk;
  }
  const std::string base = cfg.name;
  for (auto seed : seeds) {
    auto c = cfg;
    c.seed = seed;
    c.name = base + "_seed" + std::to_string(seed);
    const auto r = run_experiment(c);
    out << r.run_dir.string() << '\n';
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& reference, const std::string& out_dir,
               std::ostream& out) {
  std::vector<fs::path> dirs(runs.begin(), runs.end());
  std::optional<fs::path> ref;
  if (!reference.empty()) ref = reference;
  const auto paths = write_report(dirs, ref, out_dir.empty() ? fs::path("report") : fs::path(out_dir));
  out << paths.merged_csv.string() << '\n' << paths.plot.string() << '\n';
  if (paths.efficiency_csv) out << paths.efficiency_csv->string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active and semi-supervised segmentation experiments on synthetic scenes", "s4al"};
  app.require_subcommand(1);

  std::string config, out_dir, reference;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> runs;

  auto* gen = app.add_subcommand("generate", "Write the synthetic dataset described by a config");
  gen->add_option("--config", config, "Experiment config (JSON)")->required();
  gen->add_option("--out", out_dir, "Dataset directory (default: dataset.dir, else ./data)");

  auto* run = app.add_subcommand("run", "Run an experiment");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output root, overrides output_dir");
  run->add_option("--seeds", seeds, "Comma-separated seed sweep; one run per seed")->delimiter(',');

  auto* rep = app.add_subcommand("report", "Compare finished runs");
  rep->add_option("runs", runs, "Run directories")->required();
  rep->add_option("--reference", reference, "Fully supervised run used for the 95% summary");
  rep->add_option("--out", out_dir, "Report directory (default: ./report)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(config, out_dir, out);
    if (*run) return cmd_run(config, out_dir, seeds, out);
    return cmd_report(runs, reference, out_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace s4al
