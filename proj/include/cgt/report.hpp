#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cgt/experiment.hpp"

namespace cgt::report {

/// Arithmetic means of the relative changes over a group of cells.
struct GroupMean {
  std::string group;
  std::size_t cells = 0;
  experiment::Changes mean;
};

experiment::Changes mean_changes(const std::vector<const experiment::CellResult*>& cells);

/// "without coverage" (metric none) and "with coverage" (every other metric);
/// groups without cells are omitted.
std::vector<GroupMean> coverage_means(const experiment::ExperimentResult& r);

/// One row per distinct alpha_map (ascending) plus "all".
std::vector<GroupMean> alpha_means(const experiment::ExperimentResult& r);

struct Rendered {
  std::string csv;
  std::string markdown;
};

/// Byte-deterministic for equal inputs; values printed with two decimals,
/// undefined changes as "n/a".
Rendered render_report(const experiment::ExperimentResult& r);

/// Writes `report.csv` and `report.md` into `dir`.
void write_report(const Rendered& rendered, const std::filesystem::path& dir);

}  // namespace cgt::report
