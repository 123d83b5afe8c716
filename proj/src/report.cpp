#include "pseudocal/report.hpp"

#include "pseudocal/error.hpp"
#include "pseudocal/format.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace pseudocal::report {

namespace {

struct MethodName {
  Method method;
  std::string_view name;
  std::string_view display;
};

constexpr MethodName kMethodNames[] = {
    {Method::none, "none", "No Calib."},
    {Method::temp_oracle, "temp_oracle", "Oracle"},
    {Method::temp_source, "temp_source", "TempScal"},
    {Method::vector, "vector", "VectorScal"},
    {Method::matrix, "matrix", "MatrixScal"},
    {Method::pseudocal, "pseudocal", "PseudoCal"},
    {Method::pseudo_label, "pseudo_label", "Pseudo-Label"},
    {Method::filtered_pl, "filtered_pl", "Filtered-PL"},
    {Method::pseudocal_same, "pseudocal_same", "PseudoCal-same"},
    {Method::beta_mixup, "beta_mixup", "Mixup-Beta"},
    {Method::ensemble, "ensemble", "Ensemble"},
};

}  // namespace

std::string_view to_string(Method method) {
  for (const auto& entry : kMethodNames) {
    if (entry.method == method) return entry.name;
  }
  return "unknown";
}

std::string_view display_name(Method method) {
  for (const auto& entry : kMethodNames) {
    if (entry.method == method) return entry.display;
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "oracle") return Method::temp_oracle;
  if (text == "tempscal") return Method::temp_source;
  for (const auto& entry : kMethodNames) {
    if (entry.name == text) return entry.method;
  }
  throw Error(ErrorKind::invalid_input, "unknown method '" + std::string(text) + "'");
}

std::vector<Method> parse_methods(std::string_view comma_list) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= comma_list.size()) {
    const std::size_t stop = std::min(comma_list.find(',', start), comma_list.size());
    std::string_view item = comma_list.substr(start, stop - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.push_back(parse_method(item));
    start = stop + 1;
  }
  if (out.empty()) throw Error(ErrorKind::invalid_input, "method list is empty");
  return out;
}

bool is_temperature_method(Method method) {
  switch (method) {
    case Method::none:
    case Method::temp_oracle:
    case Method::temp_source:
    case Method::pseudocal:
    case Method::pseudo_label:
    case Method::filtered_pl:
    case Method::pseudocal_same:
    case Method::beta_mixup:
      return true;
    default:
      return false;
  }
}

const MethodResult* ExperimentResult::find(Method method) const {
  for (const auto& r : methods) {
    if (r.method == method) return &r;
  }
  return nullptr;
}

const MethodResult& ExperimentResult::at(Method method) const {
  const MethodResult* r = find(method);
  if (!r) {
    throw Error(ErrorKind::invalid_input, "result has no row for " + std::string(to_string(method)));
  }
  return *r;
}

namespace {

void deny(Method method, const std::string& why) {
  throw Error(ErrorKind::data_access,
              "method " + std::string(to_string(method)) + " requires " + why);
}

void check_access(Method method, const synth::SyntheticTask& task, const EvaluateOptions& options) {
  // Every row is scored against target labels.
  if (!task.target_labels) deny(method, "target labels for scoring, but the task has none");
  switch (method) {
    case Method::temp_source:
    case Method::vector:
    case Method::matrix:
      if (task.source_val_labels.empty() || task.source_val_inputs.rows() == 0) {
        deny(method, "a labelled source validation split");
      }
      break;
    case Method::ensemble:
      if (task.source_labels.empty() || task.source_inputs.rows() == 0) {
        deny(method, "labelled source training data");
      }
      if (!options.ensemble_config) deny(method, "an ensemble training configuration");
      if (options.ensemble_members < 1) deny(method, "at least one ensemble member");
      break;
    default:
      break;
  }
}

MethodResult score(Method method, const PredictionBatch& batch, int bins) {
  MethodResult r;
  r.method = method;
  r.reliability = metrics::reliability_bins(batch, bins);
  r.ece = metrics::ece(r.reliability);
  r.nll = metrics::mean_nll(batch);
  r.brier = metrics::mean_brier(batch);
  r.accuracy = batch.accuracy();
  return r;
}

}  // namespace

ExperimentResult evaluate_all(const Model& model, const synth::SyntheticTask& task,
                              const std::vector<Method>& methods, const EvaluateOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  for (Method m : methods) check_access(m, task, options);

  ExperimentResult result;
  result.task = task.spec;
  result.seed = options.seed;
  result.bins = options.bins;
  result.mixup = options.mixup;
  result.mixup.seed = options.seed;

  const PredictionBatch target(model.logits(task.target_inputs), task.target_labels);
  const Matrix& inputs = task.target_inputs;

  for (Method method : methods) {
    std::optional<Calibrator> calibrator;
    switch (method) {
      case Method::none:
        calibrator = Calibrator::identity();
        break;
      case Method::temp_oracle:
        calibrator = scalers::fit_oracle(target);
        break;
      case Method::temp_source:
      case Method::vector:
      case Method::matrix: {
        const PredictionBatch val(model.logits(task.source_val_inputs), task.source_val_labels);
        calibrator = method == Method::temp_source ? scalers::fit_temperature(val)
                     : method == Method::vector    ? scalers::fit_vector(val)
                                                   : scalers::fit_matrix(val);
        break;
      }
      case Method::pseudocal: {
        const PseudoTargetSet pseudo = synthesize(model, inputs, result.mixup);
        calibrator = scalers::fit_temperature(pseudo_batch(model, pseudo, result.mixup.label_mode));
        result.correspondence_rate = correspondence_rate(model, pseudo, *task.target_labels);
        result.pseudo_set_size = pseudo.size();
        break;
      }
      case Method::pseudo_label:
        calibrator = variants::pseudo_label(model, inputs);
        break;
      case Method::filtered_pl:
        calibrator = variants::filtered_pl(model, inputs, options.filter_threshold);
        break;
      case Method::pseudocal_same:
        calibrator = variants::same_label(model, inputs, result.mixup);
        break;
      case Method::beta_mixup:
        calibrator = variants::beta_mixup(model, inputs, result.mixup);
        break;
      case Method::ensemble: {
        std::vector<std::uint64_t> seeds;
        for (int k = 0; k < options.ensemble_members; ++k) {
          seeds.push_back(options.ensemble_config->seed * 1000003ULL + options.seed * 101ULL +
                          static_cast<std::uint64_t>(k) + 1);
        }
        const synth::EnsembleModel ensemble = synth::ensemble_train(task, *options.ensemble_config, seeds);
        result.methods.push_back(
            score(method, PredictionBatch(ensemble.logits(inputs), task.target_labels), options.bins));
        continue;
      }
    }
    MethodResult row = score(method, scalers::apply(*calibrator, target), options.bins);
    if (calibrator->kind == CalibratorKind::temperature) row.temperature = calibrator->temperature;
    row.converged = calibrator->converged;
    result.methods.push_back(row);
  }

  result.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::vector<MethodSummary> summarize(const std::vector<ExperimentResult>& runs) {
  std::vector<MethodSummary> rows;
  for (const auto& run : runs) {
    for (const auto& r : run.methods) {
      auto it = std::find_if(rows.begin(), rows.end(),
                             [&](const MethodSummary& s) { return s.method == r.method; });
      if (it == rows.end()) {
        rows.push_back({});
        it = rows.end() - 1;
        it->method = r.method;
      }
      it->ece += r.ece;
      it->nll += r.nll;
      it->brier += r.brier;
      it->accuracy += r.accuracy;
      if (r.temperature) it->temperature = it->temperature.value_or(0.0) + *r.temperature;
      it->runs += 1;
    }
  }
  for (auto& s : rows) {
    const double k = static_cast<double>(s.runs);
    s.ece /= k;
    s.nll /= k;
    s.brier /= k;
    s.accuracy /= k;
    if (s.temperature) *s.temperature /= k;
  }
  return rows;
}

std::string format_table(const std::vector<MethodSummary>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Method" << std::right << std::setw(10) << "ECE(%)"
      << std::setw(10) << "NLL" << std::setw(10) << "Brier" << std::setw(10) << "T"
      << std::setw(10) << "Acc(%)" << '\n';
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(16) << display_name(r.method) << std::right << std::setprecision(2)
        << std::setw(10) << 100.0 * r.ece << std::setprecision(4) << std::setw(10) << r.nll
        << std::setw(10) << r.brier << std::setprecision(3) << std::setw(10);
    if (r.temperature) {
      out << *r.temperature;
    } else {
      out << "-";
    }
    out << std::setprecision(2) << std::setw(10) << 100.0 * r.accuracy << '\n';
  }
  return out.str();
}

std::vector<SweepRow> lambda_sweep(const Model& model, const synth::SyntheticTask& task,
                                   const std::vector<double>& lambdas,
                                   const std::vector<LabelMode>& modes,
                                   const std::vector<std::uint64_t>& seeds, int bins,
                                   const MixupConfig& base) {
  if (!task.target_labels) {
    throw Error(ErrorKind::data_access, "lambda sweep requires target labels for scoring");
  }
  if (seeds.empty()) throw Error(ErrorKind::invalid_input, "lambda sweep needs at least one seed");
  for (double lam : lambdas) {
    if (!(lam > 0.5 && lam < 1.0)) {
      std::ostringstream msg;
      msg << "sweep mix ratio must lie in (0.5, 1.0), got " << lam;
      throw Error(ErrorKind::invalid_input, msg.str());
    }
  }
  const PredictionBatch target(model.logits(task.target_inputs), task.target_labels);
  std::vector<SweepRow> rows;
  for (LabelMode mode : modes) {
    for (double lam : lambdas) {
      SweepRow row;
      row.lambda = lam;
      row.label_mode = mode;
      for (auto seed : seeds) {
        MixupConfig cfg = base;
        cfg.lambda_policy = LambdaPolicy::fixed;
        cfg.lambda = lam;
        cfg.label_mode = mode;
        cfg.seed = seed;
        const Calibrator c = calibrate(model, task.target_inputs, cfg);
        row.ece_per_seed.push_back(metrics::ece(scalers::apply(c, target), bins));
      }
      double sum = 0.0;
      for (double e : row.ece_per_seed) sum += e;
      row.mean_ece = sum / static_cast<double>(row.ece_per_seed.size());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "lambda,label_mode,mean_ece,min_ece,max_ece,seeds\n";
  for (const auto& r : rows) {
    const auto [lo, hi] = std::minmax_element(r.ece_per_seed.begin(), r.ece_per_seed.end());
    out << format_number(r.lambda) << ',' << to_string(r.label_mode) << ',' << format_number(r.mean_ece)
        << ',' << format_number(*lo) << ',' << format_number(*hi) << ',' << r.ece_per_seed.size() << '\n';
  }
}

double mean_sweep_ece(const std::vector<SweepRow>& rows, const std::vector<double>& lambdas) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : rows) {
    const bool wanted = std::any_of(lambdas.begin(), lambdas.end(),
                                    [&](double l) { return std::abs(l - r.lambda) < 1e-12; });
    if (!wanted) continue;
    sum += r.mean_ece;
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::invalid_input, "no sweep rows match the requested mix ratios");
  return sum / static_cast<double>(count);
}

void write_history_csv(std::ostream& out, const std::vector<synth::HistoryPoint>& history) {
  out << "epoch,source_loss,target_error,target_nll\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << format_number(h.source_loss) << ',' << format_number(h.target_error) << ','
        << format_number(h.target_nll) << '\n';
  }
}

OverfitSummary analyze_history(const std::vector<synth::HistoryPoint>& history) {
  if (history.empty()) throw Error(ErrorKind::invalid_input, "training history is empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].target_nll < history[best].target_nll) best = i;
  }
  OverfitSummary s;
  s.best_epoch = history[best].epoch;
  s.min_nll = history[best].target_nll;
  s.final_nll = history.back().target_nll;
  s.nll_ratio = s.final_nll / s.min_nll;
  for (std::size_t i = best; i < history.size(); ++i) {
    s.max_error_change = std::max(s.max_error_change,
                                  std::abs(history[i].target_error - history[best].target_error));
  }
  return s;
}

}  // namespace pseudocal::report
