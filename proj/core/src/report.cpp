#include "s4al/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "s4al/errors.hpp"
#include "s4al/metrics.hpp"

namespace s4al {
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::string num(double v, const char* f = "%.6f") {
  char buf[40];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace

RunCurve read_run_curve(const fs::path& run_dir) {
  const auto path = run_dir / "reports.csv";
  std::ifstream in(path);
  if (!in) throw DataError("missing " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty " + path.string());
  const auto header = split(line);
  const auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path.string() + " has no column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto fcol = col("human_fraction"), mcol = col("miou");
  RunCurve curve;
  curve.name = run_dir.filename().string();
  if (curve.name.empty()) curve.name = run_dir.parent_path().filename().string();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() <= std::max(fcol, mcol)) throw DataError("malformed row in " + path.string());
    curve.points.emplace_back(std::stod(cells[fcol]), std::stod(cells[mcol]));
  }
  if (curve.points.empty()) throw DataError("no completed cycles in " + path.string());
  return curve;
}

std::string merged_csv(const std::vector<RunCurve>& runs) {
  std::string out = "run,labeled_fraction,miou\n";
  for (const auto& r : runs)
    for (const auto& [f, m] : r.points) out += r.name + "," + num(f) + "," + num(m) + "\n";
  return out;
}

std::string render_svg(const std::vector<RunCurve>& runs) {
  constexpr double kW = 640, kH = 420, kL = 70, kR = 190, kT = 30, kB = 60;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  double xmin = 1.0, xmax = 0.0, ymin = 1.0, ymax = 0.0;
  for (const auto& r : runs)
    for (const auto& [f, m] : r.points) {
      xmin = std::min(xmin, f);
      xmax = std::max(xmax, f);
      if (std::isfinite(m)) {
        ymin = std::min(ymin, m);
        ymax = std::max(ymax, m);
      }
    }
  if (xmax <= xmin) {
    xmin -= 0.05;
    xmax += 0.05;
  }
  if (ymax <= ymin) {
    ymin -= 0.05;
    ymax += 0.05;
  }
  const double xpad = 0.05 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
  xmin -= xpad, xmax += xpad, ymin = std::max(0.0, ymin - ypad), ymax = std::min(1.0, ymax + ypad);
  const auto px = [&](double f) { return kL + (f - xmin) / (xmax - xmin) * (kW - kL - kR); };
  const auto py = [&](double m) { return kH - kB - (m - ymin) / (ymax - ymin) * (kH - kT - kB); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double fx = xmin + (xmax - xmin) * k / 5, fy = ymin + (ymax - ymin) * k / 5;
    s << "<line x1=\"" << px(fx) << "\" y1=\"" << kT << "\" x2=\"" << px(fx) << "\" y2=\"" << kH - kB
      << "\" stroke=\"#ddd\"/>\n"
      << "<text x=\"" << px(fx) << "\" y=\"" << kH - kB + 18 << "\" text-anchor=\"middle\">" << num(100 * fx, "%.1f")
      << "</text>\n"
      << "<line x1=\"" << kL << "\" y1=\"" << py(fy) << "\" x2=\"" << kW - kR << "\" y2=\"" << py(fy)
      << "\" stroke=\"#ddd\"/>\n"
      << "<text x=\"" << kL - 8 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\">" << num(100 * fy, "%.1f")
      << "</text>\n";
  }
  s << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << kW - kL - kR << "\" height=\"" << kH - kT - kB
    << "\" fill=\"none\" stroke=\"black\"/>\n"
    << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">labeled pixels (%)</text>\n"
    << "<text x=\"18\" y=\"" << (kT + kH - kB) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << (kT + kH - kB) / 2 << ")\">mIoU (%)</text>\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    s << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [f, m] : runs[i].points) s << px(f) << ',' << py(m) << ' ';
    s << "\"/>\n";
    for (const auto& [f, m] : runs[i].points)
      s << "<circle cx=\"" << px(f) << "\" cy=\"" << py(m) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = kT + 10 + 18.0 * i;
    s << "<line x1=\"" << kW - kR + 12 << "\" y1=\"" << ly << "\" x2=\"" << kW - kR + 32 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << kW - kR + 38 << "\" y=\"" << ly + 4 << "\">" << runs[i].name << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<EfficiencyRow> efficiency_table(const std::vector<RunCurve>& runs, const RunCurve& reference) {
  const double ref = reference.points.back().second;
  std::vector<EfficiencyRow> rows;
  for (const auto& r : runs) rows.push_back({r.name, efficiency_summary(r.points, ref)});
  return rows;
}

ReportPaths write_report(const std::vector<fs::path>& run_dirs, const std::optional<fs::path>& reference_dir,
                         const fs::path& out_dir) {
  if (run_dirs.empty()) throw DataError("report needs at least one run directory");
  std::vector<RunCurve> runs;
  for (const auto& d : run_dirs) runs.push_back(read_run_curve(d));
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  ReportPaths paths{out_dir / "comparison.csv", out_dir / "miou_vs_labels.svg", std::nullopt};
  write_text(paths.merged_csv, merged_csv(runs));
  write_text(paths.plot, render_svg(runs));
  if (reference_dir) {
    const auto reference = read_run_curve(*reference_dir);
    std::string text = "run,reference_miou,fraction_for_95pct\n";
    for (const auto& row : efficiency_table(runs, reference))
      text += row.run + "," + num(reference.points.back().second) + "," +
              (row.fraction ? num(*row.fraction) : std::string("not reached")) + "\n";
    paths.efficiency_csv = out_dir / "efficiency.csv";
    write_text(*paths.efficiency_csv, text);
  }
  return paths;
}

}  // namespace s4al
