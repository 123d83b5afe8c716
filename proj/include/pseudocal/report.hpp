#pragma once

#include "pseudocal/pseudo_target.hpp"
#include "pseudocal/synthetic.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pseudocal::report {

enum class Method {
  none,
  temp_oracle,
  temp_source,
  vector,
  matrix,
  pseudocal,
  pseudo_label,
  filtered_pl,
  pseudocal_same,
  beta_mixup,
  ensemble,
};

std::string_view to_string(Method method);
/// Row label used in text tables ("No Calib.", "Oracle", ...).
std::string_view display_name(Method method);
/// Accepts canonical names plus the aliases "oracle" and "tempscal".
Method parse_method(std::string_view text);
std::vector<Method> parse_methods(std::string_view comma_list);

/// True for methods that only rescale the deployed model's logits by a temperature.
bool is_temperature_method(Method method);

struct MethodResult {
  Method method = Method::none;
  double ece = 0.0;
  double nll = 0.0;
  double brier = 0.0;
  double accuracy = 0.0;
  std::optional<double> temperature;
  bool converged = true;
  /// Reliability bins behind the ECE value (exported as CSV, not JSON).
  metrics::BinStats reliability;
};

struct ExperimentResult {
  synth::ShiftSpec task;
  std::uint64_t seed = 0;
  int bins = metrics::kDefaultBins;
  MixupConfig mixup;
  std::vector<MethodResult> methods;
  /// Filled when pseudocal ran and target labels exist.
  std::optional<double> correspondence_rate;
  std::optional<std::size_t> pseudo_set_size;
  double wall_clock_seconds = 0.0;

  const MethodResult* find(Method method) const;
  const MethodResult& at(Method method) const;
};

struct EvaluateOptions {
  int bins = metrics::kDefaultBins;
  std::uint64_t seed = 0;
  /// Mixup settings shared by pseudocal and its variants; seed is overridden.
  MixupConfig mixup;
  double filter_threshold = variants::kDefaultFilterThreshold;
  int ensemble_members = 5;
  /// Training recipe for ensemble members; required when ensemble is requested.
  std::optional<synth::TrainConfig> ensemble_config;
};

/// Fits every method under its legal data access and scores it on the target
/// split. Only the oracle reads target labels while fitting.
ExperimentResult evaluate_all(const Model& model, const synth::SyntheticTask& task,
                              const std::vector<Method>& methods, const EvaluateOptions& options);

struct MethodSummary {
  Method method = Method::none;
  double ece = 0.0;
  double nll = 0.0;
  double brier = 0.0;
  double accuracy = 0.0;
  std::optional<double> temperature;
  std::size_t runs = 0;
};

/// Per-method means across runs, in the order of the first run.
std::vector<MethodSummary> summarize(const std::vector<ExperimentResult>& runs);

/// Aligned text table: one row per method, ECE and accuracy in percent.
std::string format_table(const std::vector<MethodSummary>& rows);

struct SweepRow {
  double lambda = 0.0;
  LabelMode label_mode = LabelMode::hard;
  double mean_ece = 0.0;
  std::vector<double> ece_per_seed;
};

/// PseudoCal target ECE for every (lambda, label mode), averaged over seeds.
std::vector<SweepRow> lambda_sweep(const Model& model, const synth::SyntheticTask& task,
                                   const std::vector<double>& lambdas,
                                   const std::vector<LabelMode>& modes,
                                   const std::vector<std::uint64_t>& seeds,
                                   int bins = metrics::kDefaultBins,
                                   const MixupConfig& base = {});

/// Columns: lambda,label_mode,mean_ece,min_ece,max_ece,seeds.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Mean ECE over sweep rows whose lambda is in `lambdas` (all label modes).
double mean_sweep_ece(const std::vector<SweepRow>& rows, const std::vector<double>& lambdas);

/// Columns: epoch,source_loss,target_error,target_nll.
void write_history_csv(std::ostream& out, const std::vector<synth::HistoryPoint>& history);

/// Shape of a training history after its target-NLL minimum.
struct OverfitSummary {
  int best_epoch = 0;
  double min_nll = 0.0;
  double final_nll = 0.0;
  /// final_nll / min_nll
  double nll_ratio = 0.0;
  /// Largest |error(e) - error(best_epoch)| for e from best_epoch to the end.
  double max_error_change = 0.0;
};

OverfitSummary analyze_history(const std::vector<synth::HistoryPoint>& history);

}  // namespace pseudocal::report
