#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "egofuse/pipeline.hpp"

namespace egofuse {

// Writes into run_dir: metrics.csv (one row per trial plus a "mean" row),
// confusion_counts.csv and confusion.txt (summed over successful trials),
// selection_kernels.csv, selection_channels.csv, splits.csv and audit.csv.
void write_run_outputs(const RunResult& result, const std::filesystem::path& run_dir);

struct ComparisonRow {
  std::string classifier;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double kappa = 0.0;
  double sic = 0.0;
  double f1 = 0.0;
};

// Header of the comparison table.
inline constexpr const char* kComparisonHeader = "classifier,A,P,R,κ,SIC,F";

// Aggregate rows of every <in_dir>/runs/<classifier>/metrics.csv, sorted by
// classifier name.
std::vector<ComparisonRow> read_run_summaries(const std::filesystem::path& in_dir);

// Writes <in_dir>/comparison.csv and comparison.txt and re-renders each
// run's confusion.txt from its counts. Returns the table rows.
std::vector<ComparisonRow> report(const std::filesystem::path& in_dir);

}  // namespace egofuse
