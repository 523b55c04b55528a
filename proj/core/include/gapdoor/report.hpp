#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "gapdoor/experiment.hpp"

namespace gapdoor {

struct CleanAccuracyRow {
  std::string family;
  std::string head;
  double original_mean = 0.0, original_std = 0.0;
  double poisoned_mean = 0.0, poisoned_std = 0.0;
  int original_n = 0, poisoned_n = 0;  // contributing runs
  bool flagged = false;                // missing baseline or failed runs
};

/// 3x3 attack-accuracy grid: rows = training position, columns = test
/// position, mean +- population std over repeats.
struct AttackMatrix {
  std::string family;
  std::string head;
  std::vector<std::string> positions;  // axis labels, training order
  std::array<std::array<double, 3>, 3> mean{};
  std::array<std::array<double, 3>, 3> stdev{};
  std::array<std::array<int, 3>, 3> count{};
  int expected_repeats = 1;
  bool cell_flagged(int r, int c) const { return count[r][c] < expected_repeats; }
};

/// Pure function of the persisted run records: aggregating twice over the
/// same records gives byte-identical files.
struct Report {
  uint64_t config_hash = 0;
  std::string name;
  std::string dataset;
  bool desk_scale = false;
  std::vector<CleanAccuracyRow> rows;
  std::vector<AttackMatrix> matrices;
};

Report build_report(const ExperimentConfig& config, const std::vector<RunRecord>& records);

/// tables/clean_accuracy.csv, tables/attack_<family>_<head>_{mean,std}.csv,
/// tables/report.txt. Returns the paths written.
std::vector<std::filesystem::path> write_report_files(const Report& report,
                                                      const std::filesystem::path& dir);

/// figures/attack_<family>.svg (accuracy vs test position; solid = gap,
/// dotted = fc) and figures/heatmap_<family>_<head>.svg per matrix.
std::vector<std::filesystem::path> write_plots(const Report& report,
                                               const std::filesystem::path& dir);

/// Population standard deviation (N in the denominator): one repeat
/// reports 0.00 rather than an undefined value.
double population_std(const std::vector<double>& xs);
double mean_of(const std::vector<double>& xs);

}  // namespace gapdoor
