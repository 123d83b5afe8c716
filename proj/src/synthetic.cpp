#include "pseudocal/synthetic.hpp"

#include "pseudocal/error.hpp"
#include "pseudocal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace pseudocal::synth {

void ShiftSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::invalid_spec, what); };
  if (classes < 2) fail("need at least 2 classes");
  if (dim < 2) fail("need input dimension >= 2");
  if (n_source < classes || n_target < classes) fail("sample counts must be >= class count");
  if (!(cluster_std > 0.0)) fail("cluster_std must be positive");
  if (!(class_separation > 0.0)) fail("class_separation must be positive");
  if (!(source_val_fraction > 0.0 && source_val_fraction < 1.0)) {
    fail("source_val_fraction must lie in (0, 1)");
  }
  if (!std::isfinite(mean_shift) || !std::isfinite(rotation)) fail("shift parameters must be finite");
  if (mean_shift < 0.0) fail("mean_shift is a norm and must be >= 0");
  if (class_priors_target) {
    const auto& p = *class_priors_target;
    if (static_cast<int>(p.size()) != classes) fail("class_priors_target needs one entry per class");
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) fail("class priors must be non-negative");
      sum += v;
    }
    if (sum == 0.0) fail("class priors are all zero");
    if (std::abs(sum - 1.0) > 1e-6) fail("class priors must sum to 1");
  }
}

Matrix class_means(const ShiftSpec& spec) {
  Matrix means = Matrix::Zero(spec.classes, spec.dim);
  for (int c = 0; c < spec.classes; ++c) {
    if (spec.dim >= spec.classes) {
      means(c, c) = spec.class_separation;
    } else {
      const double angle = 2.0 * std::numbers::pi * c / spec.classes;
      means(c, 0) = spec.class_separation * std::cos(angle);
      means(c, 1) = spec.class_separation * std::sin(angle);
    }
  }
  return means;
}

namespace {

// Givens rotation by `angle` in each coordinate pair (0,1), (2,3), ...
void rotate_pairs(Eigen::Ref<Row> x, double angle) {
  if (angle == 0.0) return;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (Eigen::Index k = 0; k + 1 < x.size(); k += 2) {
    const double u = x[k];
    const double v = x[k + 1];
    x[k] = c * u - s * v;
    x[k + 1] = s * u + c * v;
  }
}

}  // namespace

SyntheticTask generate(const ShiftSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Matrix means = class_means(spec);
  Row translation(spec.dim);
  for (auto& v : translation) v = normal(rng);
  translation = translation.normalized() * spec.mean_shift;

  SyntheticTask task;
  task.spec = spec;

  std::vector<int> labels(static_cast<std::size_t>(spec.n_source));
  for (int i = 0; i < spec.n_source; ++i) labels[static_cast<std::size_t>(i)] = i % spec.classes;
  std::shuffle(labels.begin(), labels.end(), rng);
  Matrix source(spec.n_source, spec.dim);
  for (int i = 0; i < spec.n_source; ++i) {
    for (int j = 0; j < spec.dim; ++j) {
      source(i, j) = means(labels[static_cast<std::size_t>(i)], j) + spec.cluster_std * normal(rng);
    }
  }
  const int n_val = std::clamp(
      static_cast<int>(std::lround(spec.source_val_fraction * spec.n_source)), 1, spec.n_source - 1);
  const int n_train = spec.n_source - n_val;
  task.source_inputs = source.topRows(n_train);
  task.source_labels.assign(labels.begin(), labels.begin() + n_train);
  task.source_val_inputs = source.bottomRows(n_val);
  task.source_val_labels.assign(labels.begin() + n_train, labels.end());

  std::vector<double> priors =
      spec.class_priors_target.value_or(std::vector<double>(static_cast<std::size_t>(spec.classes), 1.0));
  std::discrete_distribution<int> pick(priors.begin(), priors.end());
  std::vector<int> target_labels(static_cast<std::size_t>(spec.n_target));
  task.target_inputs.resize(spec.n_target, spec.dim);
  for (int i = 0; i < spec.n_target; ++i) {
    const int y = pick(rng);
    target_labels[static_cast<std::size_t>(i)] = y;
    Row x = means.row(y) + translation;
    for (auto& v : x) v += spec.cluster_std * normal(rng);
    rotate_pairs(x, spec.rotation);
    task.target_inputs.row(i) = x;
  }
  task.target_labels = std::move(target_labels);
  return task;
}

TrainedClassifier::TrainedClassifier(Matrix w1, Row b1, Matrix w2, Row b2, double gamma,
                                     TrainConfig config)
    : hidden_weight_(std::move(w1)),
      hidden_bias_(std::move(b1)),
      output_weight_(std::move(w2)),
      out_bias_(std::move(b2)),
      gamma_(gamma),
      config_(config) {
  if (!(gamma_ > 0.0)) throw Error(ErrorKind::invalid_input, "gamma must be positive");
  if (out_bias_.size() < 2 || output_weight_.rows() != out_bias_.size()) {
    throw Error(ErrorKind::invalid_input, "classifier output layer shape mismatch");
  }
  if (has_hidden_layer() && (hidden_weight_.rows() != hidden_bias_.size() ||
                             output_weight_.cols() != hidden_weight_.rows())) {
    throw Error(ErrorKind::invalid_input, "classifier hidden layer shape mismatch");
  }
  config_.gamma = gamma_;
}

Eigen::Index TrainedClassifier::input_dim() const {
  return has_hidden_layer() ? hidden_weight_.cols() : output_weight_.cols();
}

Matrix TrainedClassifier::raw_logits(const Matrix& inputs) const {
  if (inputs.cols() != input_dim()) {
    std::ostringstream msg;
    msg << "model expects " << input_dim() << " input features, got " << inputs.cols();
    throw Error(ErrorKind::invalid_input, msg.str());
  }
  Matrix z;
  if (has_hidden_layer()) {
    Matrix h = inputs * hidden_weight_.transpose();
    h.rowwise() += hidden_bias_;
    h = h.array().tanh().matrix();
    z = h * output_weight_.transpose();
  } else {
    z = inputs * output_weight_.transpose();
  }
  z.rowwise() += out_bias_;
  return z;
}

Matrix TrainedClassifier::logits(const Matrix& inputs) const {
  return raw_logits(inputs) * gamma_;
}

TrainedClassifier TrainedClassifier::with_gamma(double gamma) const {
  TrainedClassifier copy = *this;
  if (!(gamma > 0.0)) throw Error(ErrorKind::invalid_input, "gamma must be positive");
  copy.gamma_ = gamma;
  copy.config_.gamma = gamma;
  return copy;
}

namespace {

// Mean cross-entropy and softmax-minus-onehot residuals for logits z.
double softmax_residuals(const Matrix& z, const std::vector<int>& y, Matrix& residual) {
  residual.resize(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int label = y[static_cast<std::size_t>(i)];
    const double lse = numerics::logsumexp(z.row(i));
    loss += lse - z(i, label);
    residual.row(i) = (z.row(i).array() - lse).exp().matrix();
    residual(i, label) -= 1.0;
  }
  return loss / static_cast<double>(z.rows());
}

}  // namespace

TrainedClassifier train(const SyntheticTask& task, const TrainConfig& config) {
  if (config.epochs < 1) throw Error(ErrorKind::invalid_input, "training needs epochs >= 1");
  if (!(config.learning_rate > 0.0)) throw Error(ErrorKind::invalid_input, "learning rate must be positive");
  if (!(config.gamma >= 1.0)) throw Error(ErrorKind::invalid_input, "gamma must be >= 1");
  if (config.hidden_units < 0) throw Error(ErrorKind::invalid_input, "hidden_units must be >= 0");
  if (config.track_history && !task.target_labels) {
    throw Error(ErrorKind::labels_required, "training history needs target labels");
  }
  const Eigen::Index d = task.source_inputs.cols();
  const Eigen::Index classes = task.spec.classes;
  const Eigen::Index hidden = config.hidden_units;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix x = task.source_inputs;
  std::vector<int> y = task.source_labels;
  if (config.bootstrap) {
    std::uniform_int_distribution<Eigen::Index> pick(0, x.rows() - 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::Index j = pick(rng);
      x.row(i) = task.source_inputs.row(j);
      y[static_cast<std::size_t>(i)] = task.source_labels[static_cast<std::size_t>(j)];
    }
  }
  const double n = static_cast<double>(x.rows());

  Matrix w1, w2;
  Row b1, b2 = Row::Zero(classes);
  if (hidden > 0) {
    w1.resize(hidden, d);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = s1 * normal(rng);
    b1 = Row::Zero(hidden);
    w2.resize(classes, hidden);
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = s2 * normal(rng);
  } else {
    w2.resize(classes, d);
    for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = 0.01 * normal(rng);
  }

  std::vector<HistoryPoint> history;
  Matrix residual;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Matrix h;
    Matrix z;
    if (hidden > 0) {
      h = x * w1.transpose();
      h.rowwise() += b1;
      h = h.array().tanh().matrix();
      z = h * w2.transpose();
    } else {
      z = x * w2.transpose();
    }
    z.rowwise() += b2;
    const double loss = softmax_residuals(z, y, residual);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "source loss became non-finite at epoch " << epoch;
      throw TrainingError(epoch, msg.str());
    }
    if (config.track_history) {
      const TrainedClassifier snapshot(w1, b1, w2, b2, 1.0, config);
      const Matrix tz = snapshot.raw_logits(task.target_inputs);
      const auto& ty = *task.target_labels;
      std::size_t errors = 0;
      double nll_sum = 0.0;
      for (Eigen::Index i = 0; i < tz.rows(); ++i) {
        const int label = ty[static_cast<std::size_t>(i)];
        errors += numerics::argmax_class(tz.row(i)) != label ? 1 : 0;
        nll_sum += numerics::nll(numerics::softmax(tz.row(i)), label);
      }
      const double m = static_cast<double>(tz.rows());
      history.push_back({epoch, loss, static_cast<double>(errors) / m, nll_sum / m});
    }

    const Matrix grad_w2 = (hidden > 0 ? residual.transpose() * h : residual.transpose() * x) / n;
    const Row grad_b2 = residual.colwise().sum() / n;
    if (hidden > 0) {
      const Matrix back = (residual * w2).array() * (1.0 - h.array().square());
      w1 -= config.learning_rate * (back.transpose() * x) / n;
      b1 -= config.learning_rate * back.colwise().sum() / n;
    }
    w2 -= config.learning_rate * grad_w2;
    b2 -= config.learning_rate * grad_b2;
    if (!w2.allFinite() || !b2.allFinite()) {
      std::ostringstream msg;
      msg << "parameters diverged at epoch " << epoch;
      throw TrainingError(epoch, msg.str());
    }
  }

  TrainedClassifier model(std::move(w1), std::move(b1), std::move(w2), std::move(b2),
                          config.gamma, config);
  model.history = std::move(history);
  return model;
}

EnsembleModel::EnsembleModel(std::vector<TrainedClassifier> members) : members_(std::move(members)) {
  if (members_.empty()) throw Error(ErrorKind::invalid_input, "ensemble needs at least one member");
  for (const auto& m : members_) {
    if (m.num_classes() != members_.front().num_classes() ||
        m.input_dim() != members_.front().input_dim()) {
      throw Error(ErrorKind::invalid_input, "ensemble members disagree on shape");
    }
  }
}

Eigen::Index EnsembleModel::num_classes() const { return members_.front().num_classes(); }
Eigen::Index EnsembleModel::input_dim() const { return members_.front().input_dim(); }

Matrix EnsembleModel::logits(const Matrix& inputs) const {
  Matrix mean_prob = Matrix::Zero(inputs.rows(), num_classes());
  for (const auto& member : members_) {
    const Matrix z = member.logits(inputs);
    for (Eigen::Index i = 0; i < z.rows(); ++i) mean_prob.row(i) += numerics::softmax(z.row(i));
  }
  mean_prob /= static_cast<double>(members_.size());
  return mean_prob.array().max(numerics::kProbFloor).log().matrix();
}

EnsembleModel ensemble_train(const SyntheticTask& task, const TrainConfig& base,
                             const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw Error(ErrorKind::invalid_input, "ensemble needs at least one seed");
  std::vector<TrainedClassifier> members;
  members.reserve(seeds.size());
  for (auto seed : seeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    cfg.bootstrap = true;
    cfg.track_history = false;
    members.push_back(train(task, cfg));
  }
  return EnsembleModel(std::move(members));
}

}  // namespace pseudocal::synth
