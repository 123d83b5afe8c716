#include "pseudocal/pseudo_target.hpp"

#include "pseudocal/error.hpp"
#include "pseudocal/format.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace pseudocal {

std::string_view to_string(LabelMode mode) {
  return mode == LabelMode::hard ? "hard" : "soft";
}

std::string_view to_string(Pairing pairing) {
  return pairing == Pairing::distinct_label ? "distinct" : "same";
}

LabelMode parse_label_mode(std::string_view text) {
  if (text == "hard") return LabelMode::hard;
  if (text == "soft") return LabelMode::soft;
  throw Error(ErrorKind::invalid_input, "label mode must be 'hard' or 'soft', got '" +
                                            std::string(text) + "'");
}

void MixupConfig::validate() const {
  if (lambda_policy == LambdaPolicy::fixed && !(lambda > 0.5 && lambda <= 1.0)) {
    std::ostringstream msg;
    msg << "fixed mix ratio must lie in (0.5, 1.0], got " << lambda;
    throw Error(ErrorKind::invalid_input, msg.str());
  }
  if (lambda_policy == LambdaPolicy::beta && !(beta_alpha > 0.0)) {
    throw Error(ErrorKind::invalid_input, "Beta mix ratio needs a positive alpha");
  }
  if (epochs < 1) throw Error(ErrorKind::invalid_input, "mixup epochs must be >= 1");
}

std::vector<int> pseudo_labels(const Model& model, const Matrix& inputs) {
  const Matrix z = model.logits(inputs);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = numerics::argmax_class(z.row(i));
  }
  return out;
}

namespace {

double sample_beta(std::mt19937_64& rng, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

}  // namespace

PseudoTargetSet synthesize(const Model& model, const Matrix& target_inputs,
                           const MixupConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(target_inputs.rows());
  if (n < 2) throw Error(ErrorKind::invalid_input, "synthesis needs at least 2 target samples");
  if (target_inputs.cols() != model.input_dim()) {
    throw Error(ErrorKind::invalid_input, "target input width differs from model input dimension");
  }

  const std::vector<int> pl = pseudo_labels(model, target_inputs);
  const Eigen::Index classes = model.num_classes();
  std::mt19937_64 rng(cfg.seed);

  std::vector<MixProvenance> kept;
  kept.reserve(n * static_cast<std::size_t>(cfg.epochs));
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = (cfg.batch_size == 0 || cfg.batch_size >= n) ? n : cfg.batch_size;
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(start + batch, n);
      std::vector<std::size_t> partner(order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(stop));
      std::shuffle(partner.begin(), partner.end(), rng);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t a = order[k];
        const std::size_t b = partner[k - start];
        const double lam = cfg.lambda_policy == LambdaPolicy::fixed
                               ? cfg.lambda
                               : sample_beta(rng, cfg.beta_alpha);
        const bool distinct = pl[a] != pl[b];
        if (distinct != (cfg.pairing == Pairing::distinct_label)) continue;
        kept.push_back({a, b, lam, pl[a], pl[b], lam > 0.5 ? a : b});
      }
    }
  }

  if (kept.empty()) {
    const bool collapsed = std::all_of(pl.begin(), pl.end(), [&](int c) { return c == pl[0]; });
    std::ostringstream msg;
    if (collapsed) {
      msg << "all target pseudo labels equal class " << pl[0] << "; no pair survives the "
          << to_string(cfg.pairing) << "-label filter";
      throw DegenerateTargetError(pl[0], msg.str());
    }
    msg << "no pair survived the " << to_string(cfg.pairing) << "-label filter";
    throw DegenerateTargetError(-1, msg.str());
  }

  PseudoTargetSet out;
  const auto m = static_cast<Eigen::Index>(kept.size());
  out.inputs.resize(m, target_inputs.cols());
  out.hard_labels.resize(kept.size());
  if (cfg.label_mode == LabelMode::soft) out.soft_labels = Matrix::Zero(m, classes);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& p = kept[static_cast<std::size_t>(i)];
    out.inputs.row(i) = p.lambda * target_inputs.row(static_cast<Eigen::Index>(p.index_a)) +
                        (1.0 - p.lambda) * target_inputs.row(static_cast<Eigen::Index>(p.index_b));
    out.hard_labels[static_cast<std::size_t>(i)] = p.lambda > 0.5 ? p.label_a : p.label_b;
    if (out.soft_labels) {
      (*out.soft_labels)(i, p.label_a) += p.lambda;
      (*out.soft_labels)(i, p.label_b) += 1.0 - p.lambda;
    }
  }
  out.provenance = std::move(kept);
  return out;
}

PredictionBatch pseudo_batch(const Model& model, const PseudoTargetSet& pseudo, LabelMode mode) {
  PredictionBatch batch(model.logits(pseudo.inputs), pseudo.hard_labels);
  if (mode == LabelMode::soft) {
    if (!pseudo.soft_labels) {
      throw Error(ErrorKind::invalid_input, "pseudo-target set was synthesized without soft labels");
    }
    batch.soft_labels = pseudo.soft_labels;
  }
  return batch;
}

Calibrator calibrate(const Model& model, const Matrix& target_inputs, const MixupConfig& cfg) {
  const PseudoTargetSet pseudo = synthesize(model, target_inputs, cfg);
  Calibrator c = scalers::fit_temperature(pseudo_batch(model, pseudo, cfg.label_mode));
  c.tag = "pseudocal";
  return c;
}

double correspondence_rate(const Model& model, const PseudoTargetSet& pseudo,
                           const std::vector<int>& target_labels) {
  if (pseudo.provenance.size() != pseudo.size() || pseudo.size() == 0) {
    throw Error(ErrorKind::invalid_input, "pseudo-target set carries no provenance");
  }
  const std::vector<int> pred = pseudo_labels(model, pseudo.inputs);
  std::size_t corresponding = 0;
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    const auto& p = pseudo.provenance[i];
    if (p.dominant_index >= target_labels.size()) {
      throw Error(ErrorKind::invalid_input, "provenance index exceeds target label count");
    }
    const int dominant_pl = p.dominant_index == p.index_a ? p.label_a : p.label_b;
    const bool pseudo_correct = pred[i] == pseudo.hard_labels[i];
    const bool real_correct = dominant_pl == target_labels[p.dominant_index];
    if (pseudo_correct == real_correct) ++corresponding;
  }
  return static_cast<double>(corresponding) / static_cast<double>(pseudo.size());
}

void write_provenance_csv(std::ostream& out, const Model& model, const PseudoTargetSet& pseudo) {
  const std::vector<int> pred = pseudo_labels(model, pseudo.inputs);
  out << "index_a,index_b,lambda,pl_a,pl_b,y_pt,pseudo_correct\n";
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    const auto& p = pseudo.provenance[i];
    out << p.index_a << ',' << p.index_b << ',' << format_number(p.lambda) << ',' << p.label_a << ','
        << p.label_b << ',' << pseudo.hard_labels[i] << ','
        << (pred[i] == pseudo.hard_labels[i] ? 1 : 0) << '\n';
  }
}

namespace variants {

Calibrator pseudo_label(const Model& model, const Matrix& target_inputs) {
  PredictionBatch batch(model.logits(target_inputs));
  batch.labels = batch.predictions();
  Calibrator c = scalers::fit_temperature(batch);
  c.tag = "pseudo_label";
  return c;
}

Calibrator filtered_pl(const Model& model, const Matrix& target_inputs, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorKind::invalid_input, "filter threshold must lie in (0, 1)");
  }
  const PredictionBatch all(model.logits(target_inputs));
  const Eigen::VectorXd conf = all.confidences();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < conf.size(); ++i) {
    if (conf[i] >= threshold) keep.push_back(i);
  }
  if (keep.empty()) {
    std::ostringstream msg;
    msg << "no target sample reaches confidence " << threshold;
    throw Error(ErrorKind::empty_filter, msg.str());
  }
  PredictionBatch batch(all.logits(keep, Eigen::all));
  batch.labels = batch.predictions();
  Calibrator c = scalers::fit_temperature(batch);
  c.tag = "filtered_pl";
  return c;
}

Calibrator same_label(const Model& model, const Matrix& target_inputs, MixupConfig cfg) {
  cfg.pairing = Pairing::same_label;
  Calibrator c = calibrate(model, target_inputs, cfg);
  c.tag = "pseudocal_same";
  return c;
}

Calibrator beta_mixup(const Model& model, const Matrix& target_inputs, MixupConfig cfg) {
  cfg.lambda_policy = LambdaPolicy::beta;
  Calibrator c = calibrate(model, target_inputs, cfg);
  c.tag = "beta_mixup";
  return c;
}

}  // namespace variants
}  // namespace pseudocal
