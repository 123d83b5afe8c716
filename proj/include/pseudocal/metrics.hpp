#pragma once

#include "pseudocal/numerics.hpp"

#include <optional>
#include <ostream>
#include <vector>

namespace pseudocal {

/// Model outputs for a set of samples: n x C logits plus optional labels.
/// Hard labels feed every metric; soft targets are only consumed by
/// temperature fitting.
struct PredictionBatch {
  Matrix logits;
  std::optional<std::vector<int>> labels;
  std::optional<Matrix> soft_labels;

  PredictionBatch() = default;
  explicit PredictionBatch(Matrix logits_,
                           std::optional<std::vector<int>> labels_ = std::nullopt)
      : logits(std::move(logits_)), labels(std::move(labels_)) {}

  Eigen::Index size() const { return logits.rows(); }
  Eigen::Index num_classes() const { return logits.cols(); }
  bool has_labels() const { return labels.has_value(); }

  /// Throws invalid_input on empty/non-finite logits or out-of-range labels.
  void validate() const;

  /// Throws labels_required when hard labels are absent.
  const std::vector<int>& require_labels() const;

  std::vector<int> predictions() const;
  /// Max softmax probability per sample.
  Eigen::VectorXd confidences() const;
  Matrix probabilities() const;
  double accuracy() const;
};

namespace metrics {

inline constexpr int kDefaultBins = 15;

struct Bin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

/// Equal-width reliability bins partitioning (0, 1].
struct BinStats {
  std::vector<Bin> bins;
  std::size_t total = 0;

  /// Columns: bin_lower, bin_upper, count, accuracy, confidence.
  void write_csv(std::ostream& out) const;
};

/// Index of the (lower, upper] bin holding `confidence`; 0 maps to the first bin.
int bin_index(double confidence, int num_bins);

BinStats reliability_bins(const PredictionBatch& batch, int num_bins = kDefaultBins);

/// sum_m |B_m|/n * |acc(B_m) - conf(B_m)|
double ece(const PredictionBatch& batch, int num_bins = kDefaultBins);
double ece(const BinStats& stats);

double mean_nll(const PredictionBatch& batch);
double mean_brier(const PredictionBatch& batch);

}  // namespace metrics
}  // namespace pseudocal
