#include "w2fair/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "w2fair/audit.hpp"
#include "w2fair/data.hpp"
#include "w2fair/model.hpp"
#include "w2fair/reports.hpp"
#include "w2fair/trainer.hpp"
#include "w2fair/version.hpp"

namespace w2fair {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string out_root() {
  const char* root = std::getenv("W2FAIR_OUT_ROOT");
  return root && *root ? root : ".";
}

std::string default_out(const std::string& name) {
  return (fs::path(out_root()) / name).string();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  if (fs::path(path).has_parent_path())
    fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

std::string format_double(double v) {
  const json j = v;
  return j.dump();
}

std::string format_gap(const std::optional<double>& gap) {
  return gap.has_value() ? format_double(*gap) : std::string("undefined");
}

Dataset load_dataset(const std::string& path, const CsvSchema& schema) {
  try {
    return load_csv(path, schema);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

ModelParams load_model(const std::string& path) {
  try {
    return load_checkpoint(path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

TrainConfig parse_config_text(const std::string& text) {
  try {
    return config_from_json(text);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    if (msg.rfind("config: ", 0) == 0) msg.erase(0, 8);
    throw ConfigError(msg);
  }
}

std::vector<std::string> split_list_on(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) parts.push_back(item);
  return parts;
}

std::vector<std::string> split_list(const std::string& text) {
  return split_list_on(text, ',');
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + ": not an unsigned integer: '" + text + "'");
  }
}

double parse_real(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError(what + ": not a number: '" + text + "'");
  }
}

// --- synthetic spec JSON -------------------------------------------------

SyntheticSpec spec_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("spec: bad JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("spec: not a JSON object");
  static const std::set<std::string> keys = {
      "num_classes", "num_features",     "per_class_group0",
      "per_class_group1", "mean_scale", "noise_sd", "bias", "seed"};
  for (const auto& item : doc.items())
    if (!keys.contains(item.key()))
      throw ConfigError("spec: unknown key '" + item.key() + "'");

  SyntheticSpec spec;
  spec.num_classes = doc.value("num_classes", spec.num_classes);
  spec.num_features = doc.value("num_features", spec.num_features);
  spec.per_class_group0 = doc.value("per_class_group0", spec.per_class_group0);
  spec.per_class_group1 = doc.value("per_class_group1", spec.per_class_group1);
  spec.mean_scale = doc.value("mean_scale", spec.mean_scale);
  spec.noise_sd = doc.value("noise_sd", spec.noise_sd);
  spec.seed = doc.value("seed", spec.seed);
  if (doc.contains("bias")) {
    if (!doc.at("bias").is_array()) throw ConfigError("spec: bias must be an array");
    for (const json& entry : doc.at("bias")) {
      static const std::set<std::string> bias_keys = {"class", "toward",
                                                      "shift", "flip_rate"};
      for (const auto& item : entry.items())
        if (!bias_keys.contains(item.key()))
          throw ConfigError("spec: unknown bias key '" + item.key() + "'");
      BiasSpec b;
      b.cls = entry.value("class", 0);
      b.toward = entry.value("toward", 0);
      b.shift = entry.value("shift", 0.0);
      b.flip_rate = entry.value("flip_rate", 0.0);
      spec.bias.push_back(b);
    }
  }
  return spec;
}

BiasSpec parse_bias_flag(const std::string& text) {
  const std::vector<std::string> parts = split_list_on(text, ':');
  if (parts.size() != 4)
    throw UsageError("--bias: expected CLASS:TOWARD:SHIFT:FLIP_RATE, got '" +
                     text + "'");
  BiasSpec b;
  b.cls = static_cast<int>(parse_u64(parts[0], "--bias class"));
  b.toward = static_cast<int>(parse_u64(parts[1], "--bias toward"));
  b.shift = parse_real(parts[2], "--bias shift");
  b.flip_rate = parse_real(parts[3], "--bias flip_rate");
  return b;
}

std::string summary_json(const Dataset& data) {
  json doc;
  doc["format"] = "w2fair-dataset-summary";
  doc["version"] = 1;
  doc["examples"] = data.size();
  doc["num_classes"] = data.num_classes;
  doc["num_features"] = data.num_features;
  json support = json::array();
  for (int k = 1; k <= data.num_classes; ++k)
    support.push_back({{"class", k},
                       {"group0", data.support(k, 0)},
                       {"group1", data.support(k, 1)}});
  doc["support"] = std::move(support);
  return doc.dump(2) + "\n";
}

void print_audit(std::ostream& out, const AuditReport& report,
                 const std::string& heading) {
  out << heading << ": accuracy=" << format_double(report.scores.accuracy)
      << " f1_macro=" << format_double(report.scores.f1_macro)
      << " f1_weighted=" << format_double(report.scores.f1_weighted) << "\n";
  for (int k = 1; k <= report.num_classes; ++k)
    out << "  class " << k << ": tpr_gap=" << format_gap(report.tpr_gap[k - 1])
        << " support=" << report.confusion.support0[k - 1] << "/"
        << report.confusion.support1[k - 1] << "\n";
}

std::string join_ints(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

// --- subcommand state ----------------------------------------------------

struct GenerateArgs {
  std::string spec_path, out_path, summary_path;
  std::vector<std::string> bias;
  std::uint64_t seed = 0;
  int classes = 0, features = 0;
  long count0 = -1, count1 = -1;
  double mean_scale = 0.0, noise_sd = 0.0;
  CLI::Option *seed_opt, *classes_opt, *features_opt, *count0_opt, *count1_opt,
      *mean_opt, *noise_opt;
};

struct AuditArgs {
  std::string data_path, model_path, out_dir;
  std::string label_column = "label", group_column = "group";
};

// Config-overriding flags shared by train and sweep.
struct TrainOverrides {
  std::uint64_t seed = 0;
  int epochs = 0, batch_size = 0, grid_steps = 0, refs = 0;
  long min_support = 0;
  double lambda = 0.0, tau_step = 0.0, tau = 0.0, lr = 0.0;
  std::string optimizer, hidden;
  CLI::Option *seed_opt = nullptr, *epochs_opt = nullptr, *batch_opt = nullptr,
              *grid_opt = nullptr, *refs_opt = nullptr, *lambda_opt = nullptr,
              *tau_step_opt = nullptr, *tau_opt = nullptr,
              *support_opt = nullptr, *lr_opt = nullptr, *optim_opt = nullptr,
              *hidden_opt = nullptr;
};

struct TrainArgs {
  std::string config_path, data_path, out_dir;
  std::string label_column = "label", group_column = "group";
  bool baseline_only = false;
  TrainOverrides over;
};

struct SweepArgs {
  std::string config_path, data_path, out_dir, seeds, lambdas;
  std::string label_column = "label", group_column = "group";
  TrainOverrides over;
};

struct ReportArgs {
  std::vector<std::string> runs;
  std::string out_dir;
};

TrainConfig apply_overrides(TrainConfig cfg, const TrainOverrides& a) {
  if (a.seed_opt && *a.seed_opt) cfg.seed = a.seed;
  if (*a.epochs_opt) cfg.epochs = a.epochs;
  if (*a.batch_opt) cfg.batch_size = a.batch_size;
  if (*a.grid_opt) cfg.grid_steps = a.grid_steps;
  if (*a.refs_opt) cfg.ref_count = a.refs;
  if (a.lambda_opt && *a.lambda_opt) cfg.lambda = a.lambda;
  if (*a.tau_step_opt) cfg.tau_step = a.tau_step;
  if (*a.tau_opt) cfg.selection.tau = a.tau;
  if (*a.support_opt) cfg.selection.min_support = a.min_support;
  if (*a.lr_opt) cfg.optimizer.lr = a.lr;
  if (*a.optim_opt) cfg.optimizer.kind = a.optimizer;
  if (*a.hidden_opt) {
    cfg.hidden.clear();
    for (const std::string& part : split_list(a.hidden))
      cfg.hidden.push_back(static_cast<int>(parse_u64(part, "--hidden")));
  }
  // round-trip through the JSON validator so flag overrides obey the same
  // rules as config files
  return parse_config_text(config_to_json(cfg));
}

void add_override_options(CLI::App* cmd, TrainOverrides& a, bool with_seed_lambda) {
  // sweep omits --seed / --lambda; those come from --seeds / --lambdas
  if (with_seed_lambda) {
    a.seed_opt = cmd->add_option("--seed", a.seed, "run seed");
    a.lambda_opt = cmd->add_option("--lambda", a.lambda, "penalty weight");
  }
  a.epochs_opt = cmd->add_option("--epochs", a.epochs, "epochs per phase");
  a.batch_opt = cmd->add_option("--batch-size", a.batch_size, "batch size");
  a.grid_opt =
      cmd->add_option("--grid-steps", a.grid_steps, "output grid resolution");
  a.refs_opt = cmd->add_option("--refs", a.refs,
                               "reference examples per group and class");
  a.tau_step_opt =
      cmd->add_option("--tau-step", a.tau_step, "pseudo-derivative step");
  a.tau_opt = cmd->add_option("--tau", a.tau, "selection gap threshold");
  a.support_opt = cmd->add_option("--min-support", a.min_support,
                                  "selection support floor");
  a.lr_opt = cmd->add_option("--lr", a.lr, "learning rate");
  a.optim_opt = cmd->add_option("--optimizer", a.optimizer, "adam or sgd");
  a.hidden_opt = cmd->add_option("--hidden", a.hidden, "hidden sizes, e.g. 64,64");
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  SyntheticSpec spec;
  if (!a.spec_path.empty()) spec = spec_from_json(read_text_file(a.spec_path));
  if (*a.seed_opt) spec.seed = a.seed;
  if (*a.classes_opt) spec.num_classes = a.classes;
  if (*a.features_opt) spec.num_features = a.features;
  if (*a.count0_opt) spec.per_class_group0 = a.count0;
  if (*a.count1_opt) spec.per_class_group1 = a.count1;
  if (*a.mean_opt) spec.mean_scale = a.mean_scale;
  if (*a.noise_opt) spec.noise_sd = a.noise_sd;
  if (!a.bias.empty()) {
    spec.bias.clear();
    for (const std::string& text : a.bias) spec.bias.push_back(parse_bias_flag(text));
  }

  Dataset data;
  try {
    data = generate(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const std::string out_path = a.out_path.empty() ? default_out("data.csv") : a.out_path;
  if (fs::path(out_path).has_parent_path())
    fs::create_directories(fs::path(out_path).parent_path());
  try {
    save_csv(data, out_path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  if (!a.summary_path.empty()) write_text_file(a.summary_path, summary_json(data));

  out << "wrote " << out_path << ": examples=" << data.size()
      << " classes=" << data.num_classes << " features=" << data.num_features
      << "\n";
  out << data.support_table();
  return kExitOk;
}

int cmd_audit(const AuditArgs& a, std::ostream& out) {
  CsvSchema schema;
  schema.label_column = a.label_column;
  schema.group_column = a.group_column;
  const Dataset data = load_dataset(a.data_path, schema);
  const ModelParams params = load_model(a.model_path);

  AuditReport report;
  try {
    report = audit_model(params, data);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }

  const std::string dir = a.out_dir.empty() ? default_out("audit") : a.out_dir;
  fs::create_directories(dir);
  save_audit_json(report, (fs::path(dir) / "audit.json").string());
  save_audit_csv(report, (fs::path(dir) / "audit.csv").string());

  print_audit(out, report, "audit");
  out << "wrote " << dir << "\n";
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig base;
  if (!a.config_path.empty())
    base = parse_config_text(read_text_file(a.config_path));
  const TrainConfig cfg = apply_overrides(base, a.over);
  CsvSchema schema;
  schema.label_column = a.label_column;
  schema.group_column = a.group_column;
  const Dataset data = load_dataset(a.data_path, schema);

  RunArtifacts run;
  try {
    run = run_pipeline(data, cfg, a.baseline_only);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const std::string dir = a.out_dir.empty() ? default_out("run") : a.out_dir;
  save_run(run, dir);

  print_audit(out, run.baseline_test, "baseline (test)");
  if (run.retrained) {
    out << "selected classes: " << join_ints(run.selection.selected) << "\n";
    if (!run.selection.flagged_excluded.empty())
      out << "flagged but under-supported: "
          << join_ints(run.selection.flagged_excluded) << "\n";
    print_audit(out, run.final_test, "regularized (test)");
  } else {
    out << "no class exceeded tau; regularized phase skipped\n";
    if (!run.selection.flagged_excluded.empty())
      out << "flagged but under-supported: "
          << join_ints(run.selection.flagged_excluded) << "\n";
  }
  out << "wrote " << dir << "\n";
  return kExitOk;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  TrainConfig base;
  if (!a.config_path.empty())
    base = parse_config_text(read_text_file(a.config_path));
  base = apply_overrides(base, a.over);

  std::vector<std::uint64_t> seeds;
  for (const std::string& part : split_list(a.seeds))
    seeds.push_back(parse_u64(part, "--seeds"));
  if (seeds.empty()) throw UsageError("--seeds: empty list");

  std::vector<double> lambdas;
  const bool lambda_grid = !a.lambdas.empty();
  if (lambda_grid)
    for (const std::string& part : split_list(a.lambdas))
      lambdas.push_back(parse_real(part, "--lambdas"));
  else
    lambdas.push_back(base.lambda);

  CsvSchema schema;
  schema.label_column = a.label_column;
  schema.group_column = a.group_column;
  const Dataset data = load_dataset(a.data_path, schema);

  const std::string dir = a.out_dir.empty() ? default_out("sweep") : a.out_dir;
  std::vector<std::string> run_dirs;
  for (const std::uint64_t seed : seeds) {
    for (const double lambda : lambdas) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.lambda = lambda;
      std::string name = "seed" + std::to_string(seed);
      if (lambda_grid) name += "_lambda" + format_double(lambda);
      const std::string run_dir = (fs::path(dir) / "runs" / name).string();

      RunArtifacts run;
      try {
        run = run_pipeline(data, cfg, false);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      save_run(run, run_dir);
      run_dirs.push_back(run_dir);

      out << name << ": baseline_acc="
          << format_double(run.baseline_test.scores.accuracy)
          << " final_acc=" << format_double(run.final_test.scores.accuracy)
          << " selected=" << join_ints(run.selection.selected) << "\n";
    }
  }

  const ExportBundle bundle = build_export_bundle(run_dirs);
  write_export_bundle(bundle, (fs::path(dir) / "export").string());

  json manifest;
  manifest["format"] = "w2fair-sweep";
  manifest["version"] = 1;
  manifest["tool_version"] = kVersion;
  manifest["seeds"] = seeds;
  if (lambda_grid) manifest["lambdas"] = lambdas;
  json runs = json::array();
  for (const std::string& d : run_dirs)
    runs.push_back(fs::path(d).lexically_relative(dir).generic_string());
  manifest["runs"] = std::move(runs);
  write_text_file((fs::path(dir) / "sweep.json").string(),
                  manifest.dump(2) + "\n");

  out << "wrote " << dir << " (" << run_dirs.size() << " runs)\n";
  return kExitOk;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  ExportBundle bundle;
  try {
    bundle = build_export_bundle(a.runs);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const std::string dir = a.out_dir.empty() ? default_out("export") : a.out_dir;
  write_export_bundle(bundle, dir);
  out << "wrote " << dir << " (" << a.runs.size() << " runs)\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"group-conditional Wasserstein-2 training and audit toolkit"};
  app.name("w2fair");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  GenerateArgs gen;
  CLI::App* generate =
      app.add_subcommand("generate", "write a synthetic biased dataset (CSV)");
  generate->add_option("--spec", gen.spec_path, "synthetic spec JSON");
  generate->add_option("--out", gen.out_path, "output CSV path");
  generate->add_option("--summary", gen.summary_path, "write a summary JSON");
  gen.seed_opt = generate->add_option("--seed", gen.seed, "generator seed");
  gen.classes_opt = generate->add_option("--classes", gen.classes, "class count");
  gen.features_opt =
      generate->add_option("--features", gen.features, "feature count");
  gen.count0_opt =
      generate->add_option("--count0", gen.count0, "group-0 examples per class");
  gen.count1_opt =
      generate->add_option("--count1", gen.count1, "group-1 examples per class");
  gen.mean_opt =
      generate->add_option("--mean-scale", gen.mean_scale, "cluster mean scale");
  gen.noise_opt = generate->add_option("--noise-sd", gen.noise_sd, "noise sd");
  generate->add_option("--bias", gen.bias,
                       "bias entry CLASS:TOWARD:SHIFT:FLIP_RATE (repeatable)");

  AuditArgs aud;
  CLI::App* audit =
      app.add_subcommand("audit", "audit a checkpoint on a dataset");
  audit->add_option("--data", aud.data_path, "dataset CSV")->required();
  audit->add_option("--model", aud.model_path, "model checkpoint JSON")->required();
  audit->add_option("--out", aud.out_dir, "output directory");
  audit->add_option("--label-column", aud.label_column, "label column name");
  audit->add_option("--group-column", aud.group_column, "group column name");

  TrainArgs tr;
  CLI::App* train =
      app.add_subcommand("train", "run the audit-retrain pipeline");
  train->add_option("--config", tr.config_path, "training config JSON");
  train->add_option("--data", tr.data_path, "dataset CSV")->required();
  train->add_option("--out", tr.out_dir, "run directory");
  train->add_flag("--baseline-only", tr.baseline_only,
                  "stop after the baseline phase");
  add_override_options(train, tr.over, true);
  train->add_option("--label-column", tr.label_column, "label column name");
  train->add_option("--group-column", tr.group_column, "group column name");

  SweepArgs sw;
  CLI::App* sweep =
      app.add_subcommand("sweep", "run the pipeline over seeds and lambdas");
  sweep->add_option("--config", sw.config_path, "training config JSON");
  sweep->add_option("--data", sw.data_path, "dataset CSV")->required();
  sweep->add_option("--out", sw.out_dir, "sweep directory");
  sweep->add_option("--seeds", sw.seeds, "comma-separated seed list")->required();
  sweep->add_option("--lambdas", sw.lambdas, "comma-separated lambda grid");
  add_override_options(sweep, sw.over, false);
  sweep->add_option("--label-column", sw.label_column, "label column name");
  sweep->add_option("--group-column", sw.group_column, "group column name");

  ReportArgs rep;
  CLI::App* report =
      app.add_subcommand("report", "export plot-ready tables from run dirs");
  report->add_option("runs", rep.runs, "run directories")->required();
  report->add_option("--out", rep.out_dir, "export directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen, out);
    if (audit->parsed()) return cmd_audit(aud, out);
    if (train->parsed()) return cmd_train(tr, out);
    if (sweep->parsed()) return cmd_sweep(sw, out);
    if (report->parsed()) return cmd_report(rep, out);
    err << "error: usage: no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "error: data: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return kExitInternal;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace w2fair
