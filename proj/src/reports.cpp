#include "w2fair/reports.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace w2fair {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  const json j = v;
  return j.dump();
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad JSON: " + e.what());
  }
}

// Every table row points back to a run; the comment header resolves the run
// name to its seed and config hash.
std::vector<std::string> run_comments(std::span<const RunSummary> runs) {
  std::vector<std::string> lines;
  for (const RunSummary& run : runs)
    lines.push_back("run=" + run.dir + " seed=" + std::to_string(run.seed) +
                    " config_hash=" + run.config_hash);
  return lines;
}

void append_score_rows(Table& t, const RunSummary& run, const std::string& phase,
                       const std::string& split, const AuditReport& report) {
  t.rows.push_back({run.dir, std::to_string(run.seed), phase, split,
                    format_double(report.scores.accuracy),
                    format_double(report.scores.f1_macro),
                    format_double(report.scores.f1_weighted)});
}

void append_gap_rows(Table& t, const RunSummary& run, const std::string& phase,
                     const std::string& split, const AuditReport& report) {
  for (int k = 1; k <= report.num_classes; ++k) {
    const auto& gap = report.tpr_gap[k - 1];
    t.rows.push_back({run.dir, std::to_string(run.seed), phase, split,
                      std::to_string(k),
                      gap.has_value() ? format_double(*gap) : std::string(),
                      std::to_string(report.confusion.support0[k - 1]),
                      std::to_string(report.confusion.support1[k - 1])});
  }
}

void append_diff_rows(Table& t, const RunSummary& run, const std::string& phase,
                      const std::string& split, const AuditReport& report) {
  for (int i = 1; i <= report.num_classes; ++i)
    for (int j = 1; j <= report.num_classes; ++j)
      t.rows.push_back({run.dir, std::to_string(run.seed), phase, split,
                        std::to_string(i), std::to_string(j),
                        format_double(report.confusion_diff[i - 1][j - 1])});
}

}  // namespace

std::string table_to_csv(const Table& table) {
  std::ostringstream out;
  for (const std::string& line : table.comments) out << "# " << line << "\n";
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << ",";
    out << table.columns[c];
  }
  out << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw std::invalid_argument("table '" + table.name +
                                  "': row width mismatch");
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ",";
      out << row[c];
    }
    out << "\n";
  }
  return out.str();
}

void save_table(const Table& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << table_to_csv(table);
  if (!out) throw std::runtime_error("write failed: " + path);
}

RunSummary load_run(const std::string& dir) {
  namespace fs = std::filesystem;
  RunSummary run;
  run.dir = dir;

  const json manifest = parse_json_file((fs::path(dir) / "manifest.json").string());
  if (manifest.value("format", "") != "w2fair-run")
    throw std::runtime_error(dir + ": manifest is not a run manifest");
  run.seed = manifest.at("seed").get<std::uint64_t>();
  run.config_hash = manifest.at("config_hash").get<std::string>();
  run.retrained = manifest.at("retrained").get<bool>();
  manifest.at("selected_classes").get_to(run.selected);

  run.config = config_from_json(read_text((fs::path(dir) / "config.json").string()));
  run.baseline_val = load_audit_json((fs::path(dir) / "audit_baseline_val.json").string());
  run.baseline_test = load_audit_json((fs::path(dir) / "audit_baseline_test.json").string());
  run.final_val = load_audit_json((fs::path(dir) / "audit_final_val.json").string());
  run.final_test = load_audit_json((fs::path(dir) / "audit_final_test.json").string());
  return run;
}

std::vector<std::vector<double>> export_gain_matrix(const AuditReport& base,
                                                    const AuditReport& treated) {
  if (base.num_classes != treated.num_classes)
    throw std::invalid_argument("gain matrix: class counts differ");
  const int k = base.num_classes;
  std::vector<std::vector<double>> gain(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      gain[i][j] = std::abs(base.confusion_diff[i][j]) -
                   std::abs(treated.confusion_diff[i][j]);
  return gain;
}

ExportBundle build_export_bundle(std::span<const std::string> run_dirs) {
  if (run_dirs.empty())
    throw std::invalid_argument("report: no run directories given");
  std::vector<RunSummary> runs;
  for (const std::string& dir : run_dirs) runs.push_back(load_run(dir));

  const std::vector<std::string> comments = run_comments(runs);

  ExportBundle bundle;
  bundle.scores.name = "scores";
  bundle.scores.comments = comments;
  bundle.scores.columns = {"run",      "seed",     "phase",      "split",
                           "accuracy", "f1_macro", "f1_weighted"};

  bundle.tpr_gaps.name = "tpr_gaps";
  bundle.tpr_gaps.comments = comments;
  bundle.tpr_gaps.columns = {"run",   "seed",    "phase",         "split",
                             "class", "tpr_gap", "support_group0",
                             "support_group1"};

  bundle.confusion_diff.name = "confusion_diff";
  bundle.confusion_diff.comments = comments;
  bundle.confusion_diff.columns = {"run",        "seed",       "phase", "split",
                                   "true_class", "pred_class", "diff"};

  bundle.gains.name = "gains";
  bundle.gains.comments = comments;
  bundle.gains.columns = {"run",        "seed",       "true_class",
                          "pred_class", "gain",       "regularized_class"};

  for (const RunSummary& run : runs) {
    append_score_rows(bundle.scores, run, "baseline", "val", run.baseline_val);
    append_score_rows(bundle.scores, run, "baseline", "test", run.baseline_test);
    append_score_rows(bundle.scores, run, "final", "val", run.final_val);
    append_score_rows(bundle.scores, run, "final", "test", run.final_test);

    append_gap_rows(bundle.tpr_gaps, run, "baseline", "val", run.baseline_val);
    append_gap_rows(bundle.tpr_gaps, run, "baseline", "test", run.baseline_test);
    append_gap_rows(bundle.tpr_gaps, run, "final", "val", run.final_val);
    append_gap_rows(bundle.tpr_gaps, run, "final", "test", run.final_test);

    append_diff_rows(bundle.confusion_diff, run, "baseline", "val",
                     run.baseline_val);
    append_diff_rows(bundle.confusion_diff, run, "baseline", "test",
                     run.baseline_test);
    append_diff_rows(bundle.confusion_diff, run, "final", "val", run.final_val);
    append_diff_rows(bundle.confusion_diff, run, "final", "test", run.final_test);

    const auto gain = export_gain_matrix(run.baseline_test, run.final_test);
    const int k = run.baseline_test.num_classes;
    for (int i = 1; i <= k; ++i) {
      const bool regularized =
          std::find(run.selected.begin(), run.selected.end(), i) !=
          run.selected.end();
      for (int j = 1; j <= k; ++j)
        bundle.gains.rows.push_back({run.dir, std::to_string(run.seed),
                                     std::to_string(i), std::to_string(j),
                                     format_double(gain[i - 1][j - 1]),
                                     regularized ? "1" : "0"});
    }
  }
  return bundle;
}

void write_export_bundle(const ExportBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const Table* t :
       {&bundle.scores, &bundle.tpr_gaps, &bundle.confusion_diff, &bundle.gains})
    save_table(*t, (fs::path(dir) / (t->name + ".csv")).string());
}

}  // namespace w2fair
