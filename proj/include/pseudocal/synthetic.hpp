#pragma once

#include "pseudocal/model.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace pseudocal::synth {

/// Generating parameters for a source/target Gaussian-cluster task.
struct ShiftSpec {
  int classes = 5;
  int dim = 10;
  int n_source = 2000;
  int n_target = 2000;
  /// Norm of the translation applied to every target cluster mean. The
  /// direction is drawn from the seed and shared by all classes.
  double mean_shift = 0.0;
  /// Angle (radians) of the rotation applied to target coordinate pairs.
  double rotation = 0.0;
  /// Target label distribution; uniform when absent. Zeros drop classes.
  std::optional<std::vector<double>> class_priors_target;
  double cluster_std = 1.0;
  /// Distance of each class mean from the origin.
  double class_separation = 3.0;
  /// Share of the source samples held out as a labelled validation split.
  double source_val_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticTask {
  ShiftSpec spec;
  Matrix source_inputs;
  std::vector<int> source_labels;
  Matrix source_val_inputs;
  std::vector<int> source_val_labels;
  Matrix target_inputs;
  /// Held out from every source-free method; only the oracle and diagnostics read it.
  std::optional<std::vector<int>> target_labels;
};

SyntheticTask generate(const ShiftSpec& spec);

/// Class means used by generate(): separation * e_c when dim >= classes,
/// otherwise evenly spaced on a circle in the first two coordinates.
Matrix class_means(const ShiftSpec& spec);

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 0.5;
  /// Logits are multiplied by gamma at inference.
  double gamma = 1.0;
  /// 0 selects multinomial logistic regression, otherwise a tanh hidden layer.
  int hidden_units = 0;
  std::uint64_t seed = 0;
  /// Train on a bootstrap resample of the source set (used by ensembles).
  bool bootstrap = false;
  bool track_history = false;
};

struct HistoryPoint {
  int epoch = 0;
  double source_loss = 0.0;
  double target_error = 0.0;
  double target_nll = 0.0;
};

class TrainedClassifier final : public Model {
 public:
  TrainedClassifier(Matrix w1, Row b1, Matrix w2, Row b2, double gamma, TrainConfig config);

  Matrix logits(const Matrix& inputs) const override;
  Eigen::Index num_classes() const override { return out_bias_.size(); }
  Eigen::Index input_dim() const override;

  /// Logits before gamma sharpening.
  Matrix raw_logits(const Matrix& inputs) const;

  /// Same weights with a different sharpening factor.
  TrainedClassifier with_gamma(double gamma) const;

  bool has_hidden_layer() const { return hidden_weight_.size() > 0; }
  double gamma() const { return gamma_; }
  const TrainConfig& config() const { return config_; }

  // Logistic regression: output_weight is C x d and hidden_* are empty.
  const Matrix& hidden_weight() const { return hidden_weight_; }
  const Row& hidden_bias() const { return hidden_bias_; }
  const Matrix& output_weight() const { return output_weight_; }
  const Row& output_bias() const { return out_bias_; }

  std::vector<HistoryPoint> history;

 private:
  Matrix hidden_weight_;
  Row hidden_bias_;
  Matrix output_weight_;
  Row out_bias_;
  double gamma_;
  TrainConfig config_;
};

/// Full-batch gradient descent on source cross-entropy.
TrainedClassifier train(const SyntheticTask& task, const TrainConfig& config);

/// Averages member softmax outputs; logits are log of the mean probability.
class EnsembleModel final : public Model {
 public:
  explicit EnsembleModel(std::vector<TrainedClassifier> members);

  Matrix logits(const Matrix& inputs) const override;
  Eigen::Index num_classes() const override;
  Eigen::Index input_dim() const override;

  const std::vector<TrainedClassifier>& members() const { return members_; }

 private:
  std::vector<TrainedClassifier> members_;
};

/// Trains one member per seed with bootstrap resampling; seeds must hold K >= 1
/// entries (K = 1 reproduces a single bootstrap-trained model).
EnsembleModel ensemble_train(const SyntheticTask& task, const TrainConfig& base,
                             const std::vector<std::uint64_t>& seeds);

}  // namespace pseudocal::synth
