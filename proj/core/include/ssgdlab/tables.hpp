#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ssgdlab/attacks.hpp"
#include "ssgdlab/config.hpp"
#include "ssgdlab/experiment.hpp"
#include "ssgdlab/mnist.hpp"

namespace ssgdlab::tables {

enum class Scale : std::uint8_t { Desk, Full };

struct TableCell {
  std::size_t row = 0;
  std::size_t col = 0;
  ExperimentConfig config;
};

/// The grid of configured runs behind one of the paper-style tables, with
/// the same row/column labels as the original layout.
struct TablePlan {
  std::string name;
  std::string title;
  bool report_test = true;  // which accuracy fills the matrix
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<TableCell> cells;
  std::string notes;
};

std::vector<std::string> preset_names();
bool is_attack_preset(const std::string& preset);

/// Throws ConfigError for unknown presets, listing the known ones.
TablePlan table_plan(const std::string& preset, Scale scale);

/// Executes the plan (cells may run concurrently, one rng stream per cell)
/// and writes <name>.csv into out_dir. Cells whose configuration cannot run
/// on the loaded dataset (n*m beyond the training set) are left empty, like
/// the blank cells in the original tables. Returns the result matrix with
/// NaN for empty cells.
std::vector<std::vector<double>> run_table(const TablePlan& plan,
                                           const MnistData& data,
                                           const std::filesystem::path& out_dir,
                                           std::size_t jobs,
                                           std::ostream* log);

/// appendix-dlg / appendix-idlg: gradient-matching demos against a raw and
/// a unit-normalized payload of the same sample, with PGM dumps and a
/// report CSV in out_dir.
std::vector<attacks::AttackReport> run_attack_preset(
    const std::string& preset, Scale scale, const MnistData& data,
    const std::filesystem::path& out_dir, std::ostream* log);

std::string matrix_csv(const TablePlan& plan,
                       const std::vector<std::vector<double>>& values);

}  // namespace ssgdlab::tables
