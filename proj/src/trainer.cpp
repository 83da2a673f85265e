#include "w2fair/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "w2fair/regularizer.hpp"
#include "w2fair/rng.hpp"
#include "w2fair/version.hpp"

namespace w2fair {

namespace {

using nlohmann::json;

// Seed-stream labels. Shuffling and reference draws live on separate
// streams so drawing references never perturbs the batch order; that is
// what makes the lambda = 0 run coincide with the baseline bit for bit.
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamSplit = 2;
constexpr std::uint64_t kStreamShuffle = 3;
constexpr std::uint64_t kStreamRefs = 4;

std::uint64_t derive(std::uint64_t seed, std::uint64_t label) {
  return Rng(seed).stream(label).next_u64();
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (cfg.batch_size < 1)
    throw std::invalid_argument("config: batch_size must be >= 1");
  for (int h : cfg.hidden)
    if (h < 1) throw std::invalid_argument("config: hidden sizes must be >= 1");
  if (cfg.optimizer.kind != "adam" && cfg.optimizer.kind != "sgd")
    throw std::invalid_argument("config: optimizer kind must be adam or sgd");
  if (!(cfg.optimizer.lr > 0.0))
    throw std::invalid_argument("config: learning rate must be positive");
  if (cfg.grid_steps < 2)
    throw std::invalid_argument("config: grid_steps must be >= 2");
  if (cfg.ref_count < 0)
    throw std::invalid_argument("config: ref_count must be >= 0");
  if (cfg.tau_step.has_value() && !(*cfg.tau_step > 0.0))
    throw std::invalid_argument("config: tau_step must be positive");
  if (!(cfg.selection.tau >= 0.0) || cfg.selection.min_support < 0)
    throw std::invalid_argument("config: invalid selection rule");
  if (!(cfg.split.train > 0.0) || !(cfg.split.val > 0.0) ||
      !(cfg.split.test > 0.0) ||
      std::abs(cfg.split.train + cfg.split.val + cfg.split.test - 1.0) > 1e-9)
    throw std::invalid_argument(
        "config: split fractions must be positive and sum to 1");
}

struct Splits {
  Dataset train, val, test;
};

Splits make_splits(const Dataset& dataset, const TrainConfig& cfg) {
  const SplitIndices idx =
      stratified_split(dataset, cfg.split, derive(cfg.seed, kStreamSplit));
  Splits s;
  s.train = subset(dataset, idx.train);
  s.val = subset(dataset, idx.val);
  s.test = subset(dataset, idx.test);
  return s;
}

struct Optimizer {
  std::string kind;
  double lr = 0.0;
  AdamState adam;

  void step(ModelParams& params, const Gradients& grads) {
    if (kind == "adam")
      adam_step(params, grads, adam);
    else
      sgd_step(params, grads, lr);
  }
};

// One training phase over a fixed train split. `classes` carries the
// regularized classes (empty for the baseline run).
TrainOutput run_phase(const Splits& splits, const TrainConfig& cfg,
                      std::span<const int> classes, const std::string& phase) {
  const Dataset& train = splits.train;
  const int num_classes = train.num_classes;
  const double tau_step = effective_tau_step(cfg);

  for (int cls = 1; cls <= num_classes; ++cls)
    if (train.support(cls, 0) + train.support(cls, 1) == 0)
      throw std::invalid_argument("train: class " + std::to_string(cls) +
                                  " is absent from the training split");
  for (int cls : classes)
    if (cls < 1 || cls > num_classes)
      throw std::invalid_argument("train: regularized class " +
                                  std::to_string(cls) + " out of range");

  // Classes with a zero multiplier never contribute a gradient; dropping
  // them up front also skips their reference draws.
  std::vector<int> active;
  for (int cls : classes)
    if (lambda_for_class(cfg, cls) != 0.0 &&
        std::find(active.begin(), active.end(), cls) == active.end())
      active.push_back(cls);
  std::sort(active.begin(), active.end());

  std::vector<int> sizes;
  sizes.push_back(train.num_features);
  for (int h : cfg.hidden) sizes.push_back(h);
  sizes.push_back(num_classes);

  TrainOutput out;
  out.params = init_params(sizes, derive(cfg.seed, kStreamInit));

  Optimizer opt;
  opt.kind = cfg.optimizer.kind;
  opt.lr = cfg.optimizer.lr;
  if (opt.kind == "adam")
    opt.adam = make_adam(out.params, cfg.optimizer.lr, cfg.optimizer.beta1,
                         cfg.optimizer.beta2, cfg.optimizer.eps);

  const long n = train.size();
  std::vector<long> order(n);
  std::set<std::pair<int, int>> warned;  // (cls, group) warned this epoch

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (long i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive(derive(cfg.seed, kStreamShuffle), epoch));
    for (long i = 0; i + 1 < n; ++i) {
      const long j = i + static_cast<long>(shuffle_rng.below(n - i));
      std::swap(order[i], order[j]);
    }
    Rng ref_rng(derive(derive(cfg.seed, kStreamRefs), epoch));
    warned.clear();

    for (long start = 0; start < n; start += cfg.batch_size) {
      const long stop = std::min<long>(start + cfg.batch_size, n);
      const long batch_n = stop - start;

      std::vector<ForwardTrace> traces;
      traces.reserve(batch_n);
      for (long b = start; b < stop; ++b)
        traces.push_back(forward(out.params, train.examples[order[b]].features));

      // cross-entropy term of the batch-mean loss, in output space
      std::vector<std::vector<double>> out_grads(
          batch_n, std::vector<double>(num_classes, 0.0));
      for (long b = 0; b < batch_n; ++b)
        cross_entropy_grad(traces[b].probs,
                           train.examples[order[start + b]].label,
                           1.0 / static_cast<double>(batch_n), out_grads[b]);

      long ref_passes = 0;
      if (!active.empty()) {
        std::vector<int> present;
        for (int cls : active) {
          for (long b = start; b < stop; ++b)
            if (train.examples[order[b]].label == cls) {
              present.push_back(cls);
              break;
            }
        }

        std::unordered_set<long> batch_idx;
        for (long b = start; b < stop; ++b) batch_idx.insert(order[b]);

        std::map<int, GroupCdfPair> plans;
        for (int cls : present) {
          const long n0 = train.support(cls, 0);
          const long n1 = train.support(cls, 1);
          if (n0 == 0 || n1 == 0) {
            for (int g = 0; g <= 1; ++g)
              if ((g == 0 ? n0 : n1) == 0 && warned.insert({cls, g}).second)
                out.warnings.push_back(
                    {phase, epoch, cls, g,
                     "empty training stratum; class skipped this epoch"});
            continue;
          }

          // group-conditional output samples: references drawn outside the
          // batch (forward only, no gradient) plus the batch's own members
          std::vector<double> samples[2];
          for (int g = 0; g <= 1; ++g) {
            const std::vector<long> refs =
                draw_reference(train, cls, g, cfg.ref_count, batch_idx, ref_rng);
            ref_passes += static_cast<long>(refs.size());
            for (long r : refs) {
              const ForwardTrace t = forward(out.params, train.examples[r].features);
              samples[g].push_back(t.probs[cls - 1]);
            }
          }
          for (long b = 0; b < batch_n; ++b) {
            const Example& ex = train.examples[order[start + b]];
            if (ex.label == cls)
              samples[ex.group].push_back(traces[b].probs[cls - 1]);
          }
          if (samples[0].empty() || samples[1].empty()) {
            for (int g = 0; g <= 1; ++g)
              if (samples[g].empty() && warned.insert({cls, g}).second)
                out.warnings.push_back(
                    {phase, epoch, cls, g,
                     "no group samples reachable; class skipped this batch"});
            continue;
          }

          std::vector<double> all(samples[0]);
          all.insert(all.end(), samples[1].begin(), samples[1].end());
          const OutputGrid grid = build_grid(all, cfg.grid_steps);
          GroupCdfPair pair;
          pair.cdf0 = empirical_cdf(samples[0], grid);
          pair.cdf1 = empirical_cdf(samples[1], grid);
          pair.n0 = n0;
          pair.n1 = n1;
          plans.emplace(cls, std::move(pair));
        }

        if (!plans.empty()) {
          std::vector<int> planned;
          for (const auto& [cls, plan] : plans) planned.push_back(cls);
          std::vector<BatchElement> elements(batch_n);
          for (long b = 0; b < batch_n; ++b) {
            const Example& ex = train.examples[order[start + b]];
            elements[b] = {traces[b].probs[ex.label - 1], ex.group, ex.label};
          }
          const std::vector<ClassGrad> grads =
              batch_pseudo_grads(elements, planned, plans, tau_step);
          for (long b = 0; b < batch_n; ++b)
            if (grads[b].grad.value != 0.0)
              out_grads[b][grads[b].cls - 1] +=
                  lambda_for_class(cfg, grads[b].cls) * grads[b].grad.value;
        }
      }
      out.ref_passes_per_batch.push_back(ref_passes);

      Gradients grads = zero_gradients(out.params);
      for (long b = 0; b < batch_n; ++b)
        backward(out.params, traces[b], out_grads[b], grads);
      opt.step(out.params, grads);
    }

    const AuditReport epoch_audit = audit_model(out.params, splits.val);
    EpochMetrics em;
    em.epoch = epoch;
    em.phase = phase;
    em.split = "val";
    em.accuracy = epoch_audit.scores.accuracy;
    em.f1_macro = epoch_audit.scores.f1_macro;
    em.f1_weighted = epoch_audit.scores.f1_weighted;
    em.tpr_gap = epoch_audit.tpr_gap;
    out.metrics.push_back(std::move(em));
  }

  out.val_audit = audit_model(out.params, splits.val);
  return out;
}

json optimizer_to_json(const OptimizerConfig& o) {
  return json{{"kind", o.kind},
              {"lr", o.lr},
              {"beta1", o.beta1},
              {"beta2", o.beta2},
              {"eps", o.eps}};
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string format_double(double v) {
  const json j = v;
  return j.dump();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

double effective_tau_step(const TrainConfig& config) {
  return config.tau_step.value_or(1.0 / config.grid_steps);
}

double lambda_for_class(const TrainConfig& config, int cls) {
  const auto it = config.lambda_per_class.find(cls);
  return it != config.lambda_per_class.end() ? it->second : config.lambda;
}

std::string config_to_json(const TrainConfig& c) {
  json doc;
  doc["seed"] = c.seed;
  doc["epochs"] = c.epochs;
  doc["batch_size"] = c.batch_size;
  doc["hidden"] = c.hidden;
  doc["optimizer"] = optimizer_to_json(c.optimizer);
  doc["split"] = {{"train", c.split.train},
                  {"val", c.split.val},
                  {"test", c.split.test}};
  json reg;
  reg["grid_steps"] = c.grid_steps;
  reg["ref_count"] = c.ref_count;
  reg["lambda"] = c.lambda;
  json per_class = json::object();
  for (const auto& [cls, v] : c.lambda_per_class)
    per_class[std::to_string(cls)] = v;
  reg["lambda_per_class"] = std::move(per_class);
  if (c.tau_step.has_value())
    reg["tau_step"] = *c.tau_step;
  else
    reg["tau_step"] = nullptr;
  doc["regularizer"] = std::move(reg);
  doc["selection"] = {{"tau", c.selection.tau},
                      {"min_support", c.selection.min_support}};
  return doc.dump(2) + "\n";
}

TrainConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: bad JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::runtime_error("config: not a JSON object");

  static const std::set<std::string> top_keys = {
      "seed",  "epochs",      "batch_size", "hidden",
      "split", "optimizer",   "regularizer", "selection"};
  for (const auto& [key, value] : doc.items())
    if (!top_keys.contains(key))
      throw std::runtime_error("config: unknown key '" + key + "'");

  TrainConfig c;
  c.seed = doc.value("seed", c.seed);
  c.epochs = doc.value("epochs", c.epochs);
  c.batch_size = doc.value("batch_size", c.batch_size);
  if (doc.contains("hidden")) doc.at("hidden").get_to(c.hidden);
  if (doc.contains("optimizer")) {
    const json& o = doc.at("optimizer");
    static const std::set<std::string> keys = {"kind", "lr", "beta1", "beta2",
                                               "eps"};
    for (const auto& [key, value] : o.items())
      if (!keys.contains(key))
        throw std::runtime_error("config: unknown optimizer key '" + key + "'");
    c.optimizer.kind = o.value("kind", c.optimizer.kind);
    c.optimizer.lr = o.value("lr", c.optimizer.lr);
    c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
    c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
    c.optimizer.eps = o.value("eps", c.optimizer.eps);
  }
  if (doc.contains("split")) {
    const json& s = doc.at("split");
    static const std::set<std::string> keys = {"train", "val", "test"};
    for (const auto& [key, value] : s.items())
      if (!keys.contains(key))
        throw std::runtime_error("config: unknown split key '" + key + "'");
    c.split.train = s.value("train", c.split.train);
    c.split.val = s.value("val", c.split.val);
    c.split.test = s.value("test", c.split.test);
  }
  if (doc.contains("regularizer")) {
    const json& r = doc.at("regularizer");
    static const std::set<std::string> keys = {
        "grid_steps", "ref_count", "lambda", "lambda_per_class", "tau_step"};
    for (const auto& [key, value] : r.items())
      if (!keys.contains(key))
        throw std::runtime_error("config: unknown regularizer key '" + key + "'");
    c.grid_steps = r.value("grid_steps", c.grid_steps);
    c.ref_count = r.value("ref_count", c.ref_count);
    c.lambda = r.value("lambda", c.lambda);
    if (r.contains("lambda_per_class")) {
      for (const auto& [key, value] : r.at("lambda_per_class").items()) {
        int cls = 0;
        std::size_t pos = 0;
        try {
          cls = std::stoi(key, &pos);
        } catch (const std::exception&) {
          pos = 0;
        }
        if (pos != key.size() || cls < 1)
          throw std::runtime_error("config: bad lambda_per_class key '" + key +
                                   "'");
        c.lambda_per_class[cls] = value.get<double>();
      }
    }
    if (r.contains("tau_step") && !r.at("tau_step").is_null())
      c.tau_step = r.at("tau_step").get<double>();
  }
  if (doc.contains("selection")) {
    const json& s = doc.at("selection");
    static const std::set<std::string> keys = {"tau", "min_support"};
    for (const auto& [key, value] : s.items())
      if (!keys.contains(key))
        throw std::runtime_error("config: unknown selection key '" + key + "'");
    c.selection.tau = s.value("tau", c.selection.tau);
    c.selection.min_support = s.value("min_support", c.selection.min_support);
  }
  validate_config(c);
  return c;
}

AuditReport audit_model(const ModelParams& params, const Dataset& data) {
  if (data.num_features != params.num_features())
    throw std::invalid_argument("audit_model: feature width mismatch");
  if (data.num_classes > params.num_classes())
    throw std::invalid_argument(
        "audit_model: dataset has more classes than the model");
  std::vector<int> preds, labels, groups;
  preds.reserve(data.size());
  for (const Example& ex : data.examples) {
    preds.push_back(predict(params, ex.features));
    labels.push_back(ex.label);
    groups.push_back(ex.group);
  }
  return build_audit_report(preds, labels, groups, params.num_classes());
}

TrainOutput train_baseline(const Dataset& dataset, const TrainConfig& config) {
  validate_config(config);
  const Splits splits = make_splits(dataset, config);
  return run_phase(splits, config, {}, "baseline");
}

TrainOutput train_regularized(const Dataset& dataset, const TrainConfig& config,
                              std::span<const int> classes) {
  validate_config(config);
  const Splits splits = make_splits(dataset, config);
  return run_phase(splits, config, classes, "regularized");
}

RunArtifacts run_pipeline(const Dataset& dataset, const TrainConfig& config,
                          bool baseline_only) {
  validate_config(config);
  const Splits splits = make_splits(dataset, config);

  RunArtifacts run;
  run.config = config;

  TrainOutput baseline = run_phase(splits, config, {}, "baseline");
  run.baseline_val = baseline.val_audit;
  run.baseline_test = audit_model(baseline.params, splits.test);
  run.metrics = baseline.metrics;
  run.warnings = baseline.warnings;
  run.selection = select_classes(run.baseline_val, config.selection);

  if (!baseline_only && !run.selection.selected.empty()) {
    TrainOutput reg =
        run_phase(splits, config, run.selection.selected, "regularized");
    run.retrained = true;
    run.final_params = std::move(reg.params);
    run.final_val = reg.val_audit;
    run.metrics.insert(run.metrics.end(), reg.metrics.begin(),
                       reg.metrics.end());
    run.warnings.insert(run.warnings.end(), reg.warnings.begin(),
                        reg.warnings.end());
  } else {
    run.retrained = false;
    run.final_params = baseline.params;
    run.final_val = run.baseline_val;
  }
  run.final_test = audit_model(run.final_params, splits.test);
  run.baseline_params = std::move(baseline.params);
  return run;
}

void save_run(const RunArtifacts& run, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "checkpoints");

  const std::string config_text = config_to_json(run.config);
  write_text((fs::path(dir) / "config.json").string(), config_text);

  save_checkpoint(run.baseline_params,
                  (fs::path(dir) / "checkpoints" / "baseline.json").string());
  save_checkpoint(run.final_params,
                  (fs::path(dir) / "checkpoints" / "final.json").string());

  save_audit_json(run.baseline_val,
                  (fs::path(dir) / "audit_baseline_val.json").string());
  save_audit_json(run.baseline_test,
                  (fs::path(dir) / "audit_baseline_test.json").string());
  save_audit_json(run.final_val, (fs::path(dir) / "audit_final_val.json").string());
  save_audit_json(run.final_test,
                  (fs::path(dir) / "audit_final_test.json").string());

  const int num_classes = run.baseline_val.num_classes;
  std::ostringstream metrics;
  metrics << "epoch,phase,split,accuracy,f1_macro,f1_weighted";
  for (int k = 1; k <= num_classes; ++k) metrics << ",tpr_gap_" << k;
  metrics << "\n";
  for (const EpochMetrics& em : run.metrics) {
    metrics << em.epoch << "," << em.phase << "," << em.split << ","
            << format_double(em.accuracy) << "," << format_double(em.f1_macro)
            << "," << format_double(em.f1_weighted);
    for (int k = 0; k < num_classes; ++k) {
      metrics << ",";
      if (k < static_cast<int>(em.tpr_gap.size()) && em.tpr_gap[k].has_value())
        metrics << format_double(*em.tpr_gap[k]);
    }
    metrics << "\n";
  }
  write_text((fs::path(dir) / "metrics.csv").string(), metrics.str());

  json selection;
  selection["selected"] = run.selection.selected;
  selection["flagged_excluded"] = run.selection.flagged_excluded;
  selection["retrained"] = run.retrained;
  selection["tau"] = run.config.selection.tau;
  selection["min_support"] = run.config.selection.min_support;
  write_text((fs::path(dir) / "selection.json").string(),
             selection.dump(2) + "\n");

  json manifest;
  manifest["format"] = "w2fair-run";
  manifest["version"] = 1;
  manifest["tool_version"] = kVersion;
  manifest["seed"] = run.config.seed;
  manifest["config_hash"] = hex64(fnv1a(config_text));
  manifest["retrained"] = run.retrained;
  manifest["selected_classes"] = run.selection.selected;
  manifest["flagged_excluded"] = run.selection.flagged_excluded;
  json warnings = json::array();
  for (const TrainWarning& w : run.warnings) {
    json entry;
    entry["phase"] = w.phase;
    entry["epoch"] = w.epoch;
    entry["class"] = w.cls;
    entry["group"] = w.group;
    entry["message"] = w.message;
    warnings.push_back(std::move(entry));
  }
  manifest["warnings"] = std::move(warnings);
  manifest["files"] = {"config.json",
                       "selection.json",
                       "metrics.csv",
                       "checkpoints/baseline.json",
                       "checkpoints/final.json",
                       "audit_baseline_val.json",
                       "audit_baseline_test.json",
                       "audit_final_val.json",
                       "audit_final_test.json"};
  write_text((fs::path(dir) / "manifest.json").string(),
             manifest.dump(2) + "\n");
}

}  // namespace w2fair
