// Command-line front end: generate -> train -> calibrate -> evaluate / sweep.

#include "pseudocal/error.hpp"
#include "pseudocal/pseudo_target.hpp"
#include "pseudocal/report.hpp"
#include "pseudocal/serialization.hpp"
#include "pseudocal/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pseudocal;

namespace {

// JSON config file: a flat object of flag names (without dashes) applied to
// the active subcommand. Nested objects address other sections explicitly.
// Flags given on the command line take precedence.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string section) : section_(std::move(section)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    io::Json j;
    try {
      j = io::Json::parse(input);
    } catch (const io::Json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    std::vector<std::string> parents;
    if (!section_.empty()) parents.push_back(section_);
    collect(j, parents, items);
    return items;
  }

 private:
  static void collect(const io::Json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      std::string name = it.key();
      std::replace(name.begin(), name.end(), '_', '-');
      if (it->is_object()) {
        collect(*it, {name}, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = name;
      if (it->is_string()) {
        item.inputs = {it->get<std::string>()};
      } else if (it->is_array()) {
        std::string joined;
        for (const auto& v : *it) {
          if (!joined.empty()) joined += ',';
          joined += v.is_string() ? v.get<std::string>() : v.dump();
        }
        item.inputs = {joined};
      } else {
        item.inputs = {it->dump()};
      }
      items.push_back(std::move(item));
    }
  }

  std::string section_;
};

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw CLI::ValidationError("list", "'" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

const CLI::Validator kOpenHalfToOne(
    [](std::string& s) -> std::string {
      try {
        const double v = std::stod(s);
        if (v > 0.5 && v <= 1.0) return {};
      } catch (const std::exception&) {
      }
      return "mix ratio must lie in (0.5, 1.0], got " + s;
    },
    "in (0.5, 1.0]");

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  return out;
}

// Shared flags. Each subcommand registers the ones it uses.
struct Common {
  std::uint64_t seed = 0;
  std::string out;
  int bins = metrics::kDefaultBins;
  double lambda = 0.65;
  std::string label_mode = "hard";
  std::string methods = "none,temp_oracle,temp_source,vector,matrix,pseudocal";
};

void add_seed_out(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for all randomness")->capture_default_str();
  cmd->add_option("--out", c.out, "Output file")->required();
}

void add_mixup_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--lambda", c.lambda, "Fixed mix ratio")->check(kOpenHalfToOne)->capture_default_str();
  cmd->add_option("--label-mode", c.label_mode, "Pseudo-target labels")
      ->check(CLI::IsMember({"hard", "soft"}))
      ->capture_default_str();
}

struct GenerateArgs {
  synth::ShiftSpec spec;
  std::string priors;
  bool strip_target_labels = false;
};

struct TrainArgs {
  std::string task;
  synth::TrainConfig config;
  int ensemble = 0;
  std::string history;
};

struct CalibrateArgs {
  std::string task;
  std::string model;
  std::string variant = "pseudocal";
  std::string pairing = "distinct";
  double beta_alpha = 0.3;
  int mix_epochs = 1;
  std::size_t batch_size = 0;
  double threshold = variants::kDefaultFilterThreshold;
  std::string provenance;
};

struct EvaluateArgs {
  std::string task;
  std::string model;
  int runs = 5;
  int ensemble_members = 5;
  std::string bins_dir;
  std::string table;
  bool timing = false;
};

struct SweepArgs {
  std::string task;
  std::string model;
  std::string lambdas = "0.51,0.55,0.6,0.65,0.7,0.8,0.9";
  std::string label_modes = "hard,soft";
  int runs = 5;
};

MixupConfig mixup_from(const Common& c) {
  MixupConfig cfg;
  cfg.lambda = c.lambda;
  cfg.label_mode = parse_label_mode(c.label_mode);
  cfg.seed = c.seed;
  return cfg;
}

std::vector<std::uint64_t> run_seeds(std::uint64_t base, int runs) {
  if (runs < 1) throw CLI::ValidationError("--runs", "must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < runs; ++k) seeds.push_back(base + static_cast<std::uint64_t>(k));
  return seeds;
}

void cmd_generate(const Common& c, GenerateArgs args) {
  args.spec.seed = c.seed;
  if (!args.priors.empty()) args.spec.class_priors_target = parse_doubles(args.priors);
  synth::SyntheticTask task = synth::generate(args.spec);
  if (args.strip_target_labels) task.target_labels.reset();
  io::write_json(c.out, io::to_json(task));
}

void cmd_train(const Common& c, TrainArgs args) {
  const synth::SyntheticTask task = io::task_from_json(io::read_json(args.task));
  args.config.seed = c.seed;
  args.config.track_history = !args.history.empty();
  if (args.ensemble > 0) {
    std::vector<std::uint64_t> seeds = run_seeds(c.seed, args.ensemble);
    const synth::EnsembleModel model = synth::ensemble_train(task, args.config, seeds);
    io::write_json(c.out, io::to_json(model));
    return;
  }
  const synth::TrainedClassifier model = synth::train(task, args.config);
  io::write_json(c.out, io::to_json(model));
  if (!args.history.empty()) {
    auto out = open_out(args.history);
    report::write_history_csv(out, model.history);
  }
}

void cmd_calibrate(const Common& c, const CalibrateArgs& args) {
  const synth::SyntheticTask task = io::task_from_json(io::read_json(args.task));
  const auto model = io::model_from_json(io::read_json(args.model));
  MixupConfig cfg = mixup_from(c);
  cfg.pairing = args.pairing == "same" ? Pairing::same_label : Pairing::distinct_label;
  cfg.beta_alpha = args.beta_alpha;
  cfg.epochs = args.mix_epochs;
  cfg.batch_size = args.batch_size;

  // Source-free: only target inputs reach the calibrator.
  const Matrix& inputs = task.target_inputs;
  Calibrator calibrator;
  std::optional<PseudoTargetSet> pseudo;
  if (args.variant == "pseudo_label") {
    calibrator = variants::pseudo_label(*model, inputs);
  } else if (args.variant == "filtered_pl") {
    calibrator = variants::filtered_pl(*model, inputs, args.threshold);
  } else {
    if (args.variant == "pseudocal_same") cfg.pairing = Pairing::same_label;
    if (args.variant == "beta_mixup") cfg.lambda_policy = LambdaPolicy::beta;
    pseudo = synthesize(*model, inputs, cfg);
    calibrator = scalers::fit_temperature(pseudo_batch(*model, *pseudo, cfg.label_mode));
    calibrator.tag = args.variant;
  }
  io::Json doc = io::to_json(calibrator);
  if (pseudo) {
    doc["mixup"] = io::to_json(cfg);
    doc["pseudo_set_size"] = pseudo->size();
  }
  io::write_json(c.out, doc);
  if (pseudo && !args.provenance.empty()) {
    auto out = open_out(args.provenance);
    write_provenance_csv(out, *model, *pseudo);
  }
  std::cout << "temperature " << calibrator.temperature << '\n';
}

void cmd_evaluate(const Common& c, const EvaluateArgs& args) {
  const synth::SyntheticTask task = io::task_from_json(io::read_json(args.task));
  const io::Json model_doc = io::read_json(args.model);
  const auto model = io::model_from_json(model_doc);
  const std::vector<report::Method> methods = report::parse_methods(c.methods);

  report::EvaluateOptions options;
  options.bins = c.bins;
  options.mixup = mixup_from(c);
  options.ensemble_members = args.ensemble_members;
  if (model_doc.value("kind", "") == "classifier") {
    options.ensemble_config = io::train_config_from_json(model_doc.at("train_config"));
  }

  std::vector<report::ExperimentResult> runs;
  io::Json run_docs = io::Json::array();
  for (auto seed : run_seeds(c.seed, args.runs)) {
    options.seed = seed;
    runs.push_back(report::evaluate_all(*model, task, methods, options));
    run_docs.push_back(io::to_json(runs.back(), args.timing));
  }
  const auto summary = report::summarize(runs);

  io::Json doc{{"schema_version", io::kSchemaVersion}, {"kind", "evaluation"}};
  doc["methods"] = c.methods;
  doc["runs"] = std::move(run_docs);
  io::Json rows = io::Json::array();
  for (const auto& s : summary) rows.push_back(io::to_json(s));
  doc["summary"] = std::move(rows);
  io::write_json(c.out, doc);

  const std::string table = report::format_table(summary);
  std::cout << table;
  if (!args.table.empty()) open_out(args.table) << table;
  if (!args.bins_dir.empty()) {
    fs::create_directories(args.bins_dir);
    for (const auto& r : runs.front().methods) {
      auto out = open_out(fs::path(args.bins_dir) / ("bins_" + std::string(report::to_string(r.method)) + ".csv"));
      r.reliability.write_csv(out);
    }
  }
}

void cmd_sweep(const Common& c, const SweepArgs& args) {
  const synth::SyntheticTask task = io::task_from_json(io::read_json(args.task));
  const auto model = io::model_from_json(io::read_json(args.model));
  std::vector<LabelMode> modes;
  std::stringstream ss(args.label_modes);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) modes.push_back(parse_label_mode(item));
  }
  MixupConfig base = mixup_from(c);
  const auto rows = report::lambda_sweep(*model, task, parse_doubles(args.lambdas), modes,
                                         run_seeds(c.seed, args.runs), c.bins, base);
  auto out = open_out(c.out);
  report::write_sweep_csv(out, rows);
}

int fail(std::string_view kind, const std::string& message, int code) {
  std::string flat = message;
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  std::cerr << "error: " << kind << ": " << flat << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-free temperature calibration with mixup pseudo-target sets"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  // --config belongs to the top-level app; hoist it in front of the subcommand
  // so it may be written anywhere on the line.
  static const std::vector<std::string> kSubcommands = {"generate", "train", "calibrate", "evaluate", "sweep"};
  std::vector<std::string> args;
  std::vector<std::string> config_args;
  std::string section;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      config_args = {arg, argv[++i]};
    } else if (arg.rfind("--config=", 0) == 0) {
      config_args = {arg};
    } else {
      if (section.empty() && std::find(kSubcommands.begin(), kSubcommands.end(), arg) != kSubcommands.end()) {
        section = arg;
      }
      args.push_back(arg);
    }
  }
  args.insert(args.begin(), config_args.begin(), config_args.end());
  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back

  app.set_config("--config", "", "JSON file with flag values for the subcommand");
  app.config_formatter(std::make_shared<JsonConfig>(section));

  Common common;

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic source/target task");
  add_seed_out(generate, common);
  generate->add_option("--classes", gen.spec.classes)->capture_default_str();
  generate->add_option("--dim", gen.spec.dim)->capture_default_str();
  generate->add_option("--n-source", gen.spec.n_source)->capture_default_str();
  generate->add_option("--n-target", gen.spec.n_target)->capture_default_str();
  generate->add_option("--mean-shift", gen.spec.mean_shift)->capture_default_str();
  generate->add_option("--rotation", gen.spec.rotation, "Radians")->capture_default_str();
  generate->add_option("--priors", gen.priors, "Comma list of target class priors");
  generate->add_option("--cluster-std", gen.spec.cluster_std)->capture_default_str();
  generate->add_option("--separation", gen.spec.class_separation)->capture_default_str();
  generate->add_option("--val-fraction", gen.spec.source_val_fraction)->capture_default_str();
  generate->add_flag("--strip-target-labels", gen.strip_target_labels,
                     "Omit target labels from the task file");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a source classifier");
  add_seed_out(train, common);
  train->add_option("--task", tr.task)->required()->check(CLI::ExistingFile);
  train->add_option("--epochs", tr.config.epochs)->capture_default_str();
  train->add_option("--lr", tr.config.learning_rate)->capture_default_str();
  train->add_option("--gamma", tr.config.gamma, "Confidence sharpening")->capture_default_str();
  train->add_option("--hidden", tr.config.hidden_units, "Hidden units (0 = logistic)")->capture_default_str();
  train->add_option("--ensemble", tr.ensemble, "Train an ensemble of this many members");
  train->add_option("--history", tr.history, "Write per-epoch history CSV");

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Fit a source-free temperature");
  add_seed_out(calibrate, common);
  add_mixup_flags(calibrate, common);
  calibrate->add_option("--task", cal.task)->required()->check(CLI::ExistingFile);
  calibrate->add_option("--model", cal.model)->required()->check(CLI::ExistingFile);
  calibrate->add_option("--variant", cal.variant)
      ->check(CLI::IsMember({"pseudocal", "pseudo_label", "filtered_pl", "pseudocal_same", "beta_mixup"}))
      ->capture_default_str();
  calibrate->add_option("--pairing", cal.pairing)->check(CLI::IsMember({"distinct", "same"}))->capture_default_str();
  calibrate->add_option("--beta-alpha", cal.beta_alpha)->capture_default_str();
  calibrate->add_option("--mix-epochs", cal.mix_epochs)->capture_default_str();
  calibrate->add_option("--batch-size", cal.batch_size, "0 = whole target set")->capture_default_str();
  calibrate->add_option("--threshold", cal.threshold, "Filtered-PL confidence threshold")->capture_default_str();
  calibrate->add_option("--provenance", cal.provenance, "Write pseudo-target provenance CSV");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score calibration methods on the target split");
  add_seed_out(evaluate, common);
  add_mixup_flags(evaluate, common);
  evaluate->add_option("--task", ev.task)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--model", ev.model)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--methods", common.methods, "Comma list of methods")->capture_default_str();
  evaluate->add_option("--bins", common.bins)->check(CLI::PositiveNumber)->capture_default_str();
  evaluate->add_option("--runs", ev.runs, "Seeds seed..seed+runs-1")->capture_default_str();
  evaluate->add_option("--ensemble-members", ev.ensemble_members)->capture_default_str();
  evaluate->add_option("--bins-dir", ev.bins_dir, "Write reliability-bin CSVs for the first run");
  evaluate->add_option("--table", ev.table, "Write the text table");
  evaluate->add_flag("--timing", ev.timing, "Include wall-clock seconds in the result");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "PseudoCal ECE across mix ratios");
  add_seed_out(sweep, common);
  add_mixup_flags(sweep, common);
  sweep->add_option("--task", sw.task)->required()->check(CLI::ExistingFile);
  sweep->add_option("--model", sw.model)->required()->check(CLI::ExistingFile);
  sweep->add_option("--lambdas", sw.lambdas)->capture_default_str();
  sweep->add_option("--label-modes", sw.label_modes)->capture_default_str();
  sweep->add_option("--bins", common.bins)->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--runs", sw.runs)->capture_default_str();

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*generate) cmd_generate(common, gen);
    if (*train) cmd_train(common, tr);
    if (*calibrate) cmd_calibrate(common, cal);
    if (*evaluate) cmd_evaluate(common, ev);
    if (*sweep) cmd_sweep(common, sw);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  } catch (const Error& e) {
    return fail(to_string(e.kind()), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
