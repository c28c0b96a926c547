#include "cgt/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace cgt::report {

using experiment::CellResult;
using experiment::Changes;

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // Avoid "-0.00".
  if (std::string(buf) == "-0.00") return "0.00";
  return buf;
}

std::string pct(double fraction) { return fmt(100.0 * fraction); }

std::string changes_cells(const Changes& c, const char* sep) {
  std::string s;
  for (double v : {c.clean, c.natural, c.adversarial, c.mpc, c.rpc}) s += sep + fmt(v);
  return s;
}

void group_table(std::ostringstream& md, const char* first_col, const std::vector<GroupMean>& rows) {
  md << "| " << first_col << " | cells | clean | natural | adversarial | mPC | rPC |\n";
  md << "|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& g : rows) {
    md << "| " << g.group << " | " << g.cells;
    for (double v : {g.mean.clean, g.mean.natural, g.mean.adversarial, g.mean.mpc, g.mean.rpc})
      md << " | " << fmt(v);
    md << " |\n";
  }
}

}  // namespace

Changes mean_changes(const std::vector<const CellResult*>& cells) {
  Changes m;
  if (cells.empty()) return m;
  for (const auto* c : cells) {
    m.clean += c->change.clean;
    m.natural += c->change.natural;
    m.adversarial += c->change.adversarial;
    m.mpc += c->change.mpc;
    m.rpc += c->change.rpc;
  }
  const double n = static_cast<double>(cells.size());
  m.clean /= n;
  m.natural /= n;
  m.adversarial /= n;
  m.mpc /= n;
  m.rpc /= n;
  return m;
}

std::vector<GroupMean> coverage_means(const experiment::ExperimentResult& r) {
  std::vector<const CellResult*> without, with;
  for (const auto& c : r.cells)
    (c.cell.metric == coverage::MetricSelection::none ? without : with).push_back(&c);
  std::vector<GroupMean> out;
  if (!without.empty()) out.push_back({"without coverage", without.size(), mean_changes(without)});
  if (!with.empty()) out.push_back({"with coverage", with.size(), mean_changes(with)});
  return out;
}

std::vector<GroupMean> alpha_means(const experiment::ExperimentResult& r) {
  std::map<double, std::vector<const CellResult*>> by_alpha;
  std::vector<const CellResult*> all;
  for (const auto& c : r.cells) {
    by_alpha[c.cell.alpha_map].push_back(&c);
    all.push_back(&c);
  }
  std::vector<GroupMean> out;
  for (const auto& [a, cells] : by_alpha)
    out.push_back({"alpha_map " + fmt(a), cells.size(), mean_changes(cells)});
  if (!all.empty()) out.push_back({"all", all.size(), mean_changes(all)});
  return out;
}

Rendered render_report(const experiment::ExperimentResult& r) {
  Rendered out;
  std::ostringstream csv;
  csv << "metric,alpha_map,bugs,retrain_size,map_clean,map_natural,map_adv,mpc,rpc,"
         "d_clean,d_natural,d_adv,d_mpc,d_rpc\n";
  const auto& b = r.baseline;
  csv << "baseline,,,," << fmt(b.map_clean) << ',' << fmt(b.map_natural) << ',' << fmt(b.map_adv) << ','
      << fmt(b.mpc) << ',' << fmt(b.rpc) << ",,,,,\n";
  for (const auto& c : r.cells) {
    csv << coverage::to_string(c.cell.metric) << ',' << fmt(c.cell.alpha_map) << ',' << c.bugs() << ','
        << c.retrain_size << ',' << fmt(c.scores.map_clean) << ',' << fmt(c.scores.map_natural) << ','
        << fmt(c.scores.map_adv) << ',' << fmt(c.scores.mpc) << ',' << fmt(c.scores.rpc)
        << changes_cells(c.change, ",") << '\n';
  }
  out.csv = csv.str();

  std::ostringstream md;
  md << "# Experiment report\n\n";
  md << "Mode: " << experiment::to_string(r.mode) << ", seed " << r.seed << ".\n\n";

  md << "## Baseline neuron coverage (NC, %)\n\n";
  md << "| set | t=0.25 | t=0.50 | t=0.75 |\n|---|---:|---:|---:|\n";
  for (const auto& row : r.baseline_nc)
    md << "| " << row.set << " | " << pct(row.nc[0]) << " | " << pct(row.nc[1]) << " | " << pct(row.nc[2])
       << " |\n";

  md << "\n## Baseline scores\n\n";
  md << "| mAP clean | mAP natural | mAP adversarial | mPC | rPC |\n|---:|---:|---:|---:|---:|\n";
  md << "| " << fmt(b.map_clean) << " | " << fmt(b.map_natural) << " | " << fmt(b.map_adv) << " | "
     << fmt(b.mpc) << " | " << fmt(b.rpc) << " |\n";

  md << "\n## Relative change vs baseline (%)\n\n";
  md << "| metric | alpha_map | bugs | clean | natural | adversarial | mPC | rPC |\n";
  md << "|---|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& c : r.cells)
    md << "| " << coverage::to_string(c.cell.metric) << " | " << fmt(c.cell.alpha_map) << " | " << c.bugs()
       << changes_cells(c.change, " | ") << " |\n";

  md << "\n## Mean relative change with and without coverage (%)\n\n";
  group_table(md, "group", coverage_means(r));

  md << "\n## Mean relative change by robustness type (%)\n\n";
  group_table(md, "group", alpha_means(r));
  out.markdown = md.str();
  return out;
}

void write_report(const Rendered& rendered, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, text] : {std::pair{"report.csv", &rendered.csv}, std::pair{"report.md", &rendered.markdown}}) {
    std::ofstream out(dir / name, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out << *text;
    if (!out) throw IoError("short write to " + (dir / name).string());
  }
}

}  // namespace cgt::report
