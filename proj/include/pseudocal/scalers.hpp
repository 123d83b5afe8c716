#pragma once

#include "pseudocal/metrics.hpp"

#include <string>

namespace pseudocal {

enum class CalibratorKind { identity, temperature, vector, matrix };

std::string_view to_string(CalibratorKind kind);

/// A fitted post-hoc transform on logits.
struct Calibrator {
  CalibratorKind kind = CalibratorKind::identity;
  double temperature = 1.0;  // temperature kind
  Row scale;                 // vector kind
  Row bias;                  // vector and matrix kinds
  Matrix weight;             // matrix kind, C x C
  /// False when gradient descent stopped on the iteration cap.
  bool converged = true;
  /// Free-form provenance, e.g. "oracle" or "pseudocal".
  std::string tag;

  static Calibrator identity();
  static Calibrator from_temperature(double t, std::string tag = {});

  /// Throws invalid_input when parameters are inconsistent or out of range.
  void validate() const;
};

namespace scalers {

inline constexpr double kMinTemperature = 0.05;
inline constexpr double kMaxTemperature = 20.0;
inline constexpr double kTemperatureTol = 1e-4;

Matrix apply(const Calibrator& calibrator, const Matrix& logits);
PredictionBatch apply(const Calibrator& calibrator, const PredictionBatch& batch);

/// Mean NLL of softmax(z_i / T) against the batch targets (soft targets when
/// present, else hard labels), evaluated in log-space.
double temperature_objective(const PredictionBatch& batch, double temperature);

/// T = argmin over [0.05, 20] of temperature_objective.
Calibrator fit_temperature(const PredictionBatch& batch);

/// fit_temperature against true labels; tagged "oracle".
Calibrator fit_oracle(const PredictionBatch& batch);

struct NllDecomposition {
  double total = 0.0;
  double correct_term = 0.0;  // mean NLL over correctly predicted samples
  double wrong_term = 0.0;    // mean NLL over wrongly predicted samples; 0 if none
  std::size_t n_correct = 0;
  std::size_t n_wrong = 0;
};

/// Splits the batch into correct/wrong predictions and reports the mean
/// NLL of each split at temperature T. total is computed over the whole
/// batch independently of the split.
NllDecomposition nll_decomposition(const PredictionBatch& batch, double temperature);

struct DescentOptions {
  double step = 0.01;
  int max_iterations = 2000;
  double gradient_tol = 1e-6;
};

/// Per-class scale and bias, z * s + b.
Calibrator fit_vector(const PredictionBatch& batch, const DescentOptions& options = {});

/// Affine W z + b.
Calibrator fit_matrix(const PredictionBatch& batch, const DescentOptions& options = {});

/// Exact mean NLL (log-space) of a calibrated batch against hard labels.
double calibrated_nll(const Calibrator& calibrator, const PredictionBatch& batch);

}  // namespace scalers
}  // namespace pseudocal
