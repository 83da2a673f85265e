#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "w2fair/audit.hpp"
#include "w2fair/data.hpp"
#include "w2fair/model.hpp"

namespace w2fair {

struct OptimizerConfig {
  std::string kind = "adam";  // "adam" or "sgd"
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  int epochs = 5;
  int batch_size = 32;
  std::vector<int> hidden = {64, 64};
  OptimizerConfig optimizer;
  SplitFractions split;

  int grid_steps = 50;  // output-grid resolution of the per-batch CDFs
  int ref_count = 16;   // reference examples drawn per group and class
  double lambda = 1e-4;
  std::map<int, double> lambda_per_class;  // overrides `lambda` per class
  std::optional<double> tau_step;          // defaults to 1/grid_steps

  SelectionRule selection;
};

double effective_tau_step(const TrainConfig& config);
double lambda_for_class(const TrainConfig& config, int cls);

std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& text);

struct EpochMetrics {
  int epoch = 0;  // 1-based
  std::string phase;
  std::string split;
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double f1_weighted = 0.0;
  std::vector<std::optional<double>> tpr_gap;
};

struct TrainWarning {
  std::string phase;
  int epoch = 0;
  int cls = 0;
  int group = -1;
  std::string message;
};

struct TrainOutput {
  ModelParams params;
  AuditReport val_audit;
  std::vector<EpochMetrics> metrics;
  std::vector<TrainWarning> warnings;
  // Reference forward passes per optimizer step; all zero without active
  // regularized classes. At most 2 * ref_count * (regularized classes in
  // the batch) each.
  std::vector<long> ref_passes_per_batch;
};

// Predictions of params over data, folded into an audit report.
AuditReport audit_model(const ModelParams& params, const Dataset& data);

// Both trainers split the dataset internally with the same derived seed, so
// a shared config sees identical train/val/test sets, batch order and
// parameter init; with lambda = 0 the regularized trainer is bit-identical
// to the baseline.
TrainOutput train_baseline(const Dataset& dataset, const TrainConfig& config);
TrainOutput train_regularized(const Dataset& dataset, const TrainConfig& config,
                              std::span<const int> classes);

struct RunArtifacts {
  TrainConfig config;
  ModelParams baseline_params;
  ModelParams final_params;
  AuditReport baseline_val;
  AuditReport baseline_test;
  AuditReport final_val;
  AuditReport final_test;
  ClassSelection selection;
  bool retrained = false;  // false: nothing selected (or baseline_only)
  std::vector<EpochMetrics> metrics;
  std::vector<TrainWarning> warnings;
};

// Baseline train -> validation audit -> class selection -> regularized
// retrain from a fresh re-init -> final audits. When nothing is selected
// (or baseline_only is set) the final model is the baseline and the run is
// marked not retrained.
RunArtifacts run_pipeline(const Dataset& dataset, const TrainConfig& config,
                          bool baseline_only = false);

// Writes the run directory: config.json, manifest.json, selection.json,
// metrics.csv, checkpoints/, audit_*.json. Deterministic bytes for a
// deterministic run.
void save_run(const RunArtifacts& run, const std::string& dir);

}  // namespace w2fair
