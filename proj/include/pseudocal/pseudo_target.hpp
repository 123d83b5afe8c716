#pragma once

#include "pseudocal/model.hpp"
#include "pseudocal/scalers.hpp"

#include <cstdint>
#include <ostream>
#include <vector>

namespace pseudocal {

enum class LambdaPolicy { fixed, beta };
enum class LabelMode { hard, soft };
enum class Pairing { distinct_label, same_label };

std::string_view to_string(LabelMode mode);
std::string_view to_string(Pairing pairing);
LabelMode parse_label_mode(std::string_view text);

struct MixupConfig {
  LambdaPolicy lambda_policy = LambdaPolicy::fixed;
  double lambda = 0.65;      // fixed policy, in (0.5, 1]
  double beta_alpha = 0.3;   // Beta(alpha, alpha) policy
  LabelMode label_mode = LabelMode::hard;
  Pairing pairing = Pairing::distinct_label;
  int epochs = 1;
  /// Pairs are drawn within mini-batches of this size; 0 means one batch.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MixProvenance {
  std::size_t index_a = 0;
  std::size_t index_b = 0;
  double lambda = 0.0;
  int label_a = 0;  // pseudo label of a
  int label_b = 0;  // pseudo label of b
  /// index_a when lambda > 0.5, otherwise index_b.
  std::size_t dominant_index = 0;
};

/// Mixed inputs labelled by the pseudo label of their dominant constituent.
struct PseudoTargetSet {
  Matrix inputs;
  std::vector<int> hard_labels;
  std::optional<Matrix> soft_labels;
  std::vector<MixProvenance> provenance;

  std::size_t size() const { return hard_labels.size(); }
};

/// Argmax of the model's logits on each row.
std::vector<int> pseudo_labels(const Model& model, const Matrix& inputs);

/// Mixup over shuffled pairs of target inputs. Each epoch draws one random
/// permutation per mini-batch and pairs sample i with perm(i); pairs are kept
/// according to cfg.pairing. Throws DegenerateTargetError when nothing survives.
PseudoTargetSet synthesize(const Model& model, const Matrix& target_inputs,
                           const MixupConfig& cfg);

/// Model logits on the pseudo set paired with its labels.
PredictionBatch pseudo_batch(const Model& model, const PseudoTargetSet& pseudo,
                             LabelMode mode);

/// Synthesize, run inference on the mixed inputs, fit a temperature.
Calibrator calibrate(const Model& model, const Matrix& target_inputs,
                     const MixupConfig& cfg = {});

/// Fraction of pseudo samples whose correctness against y_pt matches the
/// correctness of their dominant real sample against its true label.
double correspondence_rate(const Model& model, const PseudoTargetSet& pseudo,
                           const std::vector<int>& target_labels);

/// Audit CSV: index_a,index_b,lambda,pl_a,pl_b,y_pt,pseudo_correct.
void write_provenance_csv(std::ostream& out, const Model& model,
                          const PseudoTargetSet& pseudo);

namespace variants {

inline constexpr double kDefaultFilterThreshold = 0.95;

/// Temperature fitted on real target samples against their own pseudo labels.
Calibrator pseudo_label(const Model& model, const Matrix& target_inputs);

/// As pseudo_label, restricted to samples with confidence >= threshold.
Calibrator filtered_pl(const Model& model, const Matrix& target_inputs,
                       double threshold = kDefaultFilterThreshold);

/// PseudoCal with same-label pairing.
Calibrator same_label(const Model& model, const Matrix& target_inputs, MixupConfig cfg = {});

/// PseudoCal with a Beta(alpha, alpha) mix ratio per pair.
Calibrator beta_mixup(const Model& model, const Matrix& target_inputs, MixupConfig cfg = {});

}  // namespace variants
}  // namespace pseudocal
