#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "w2fair/audit.hpp"
#include "w2fair/trainer.hpp"

namespace w2fair {

// Plot-ready CSV table: '#' comment lines, a header row, string cells.
struct Table {
  std::string name;  // file stem, e.g. "tpr_gaps"
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

std::string table_to_csv(const Table& table);
void save_table(const Table& table, const std::string& path);

// One run directory, loaded back from disk.
struct RunSummary {
  std::string dir;
  std::uint64_t seed = 0;
  std::string config_hash;
  bool retrained = false;
  std::vector<int> selected;
  TrainConfig config;
  AuditReport baseline_val, baseline_test, final_val, final_test;
};

RunSummary load_run(const std::string& dir);

// Entrywise |base.confusion_diff| - |treated.confusion_diff|; positive
// entries mean the treatment shrank the group difference there.
std::vector<std::vector<double>> export_gain_matrix(const AuditReport& base,
                                                    const AuditReport& treated);

// The four export tables; every row names its run, and the comment header
// maps each run to its seed and config hash.
struct ExportBundle {
  Table scores;          // accuracy / F1 per run, phase and split
  Table tpr_gaps;        // per-class gap per run, phase and split
  Table confusion_diff;  // long-form group confusion difference
  Table gains;           // long-form gain matrix on the test split
};

ExportBundle build_export_bundle(std::span<const std::string> run_dirs);
void write_export_bundle(const ExportBundle& bundle, const std::string& dir);

}  // namespace w2fair
