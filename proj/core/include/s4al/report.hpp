#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace s4al {

// (human-labelled fraction, mIoU) per cycle of one run.
struct RunCurve {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Reads <run_dir>/reports.csv. Throws DataError if it is missing or empty.
RunCurve read_run_curve(const std::filesystem::path& run_dir);

// "run,labeled_fraction,miou" rows in input order.
std::string merged_csv(const std::vector<RunCurve>& runs);

// Labelled fraction vs mIoU, one polyline per run.
std::string render_svg(const std::vector<RunCurve>& runs);

struct EfficiencyRow {
  std::string run;
  std::optional<double> fraction;  // nullopt: 95% of the reference never reached
};

// Reference mIoU is the last cycle of `reference`.
std::vector<EfficiencyRow> efficiency_table(const std::vector<RunCurve>& runs, const RunCurve& reference);

struct ReportPaths {
  std::filesystem::path merged_csv;
  std::filesystem::path plot;
  std::optional<std::filesystem::path> efficiency_csv;
};

ReportPaths write_report(const std::vector<std::filesystem::path>& run_dirs,
                         const std::optional<std::filesystem::path>& reference_dir,
                         const std::filesystem::path& out_dir);

}  // namespace s4al
