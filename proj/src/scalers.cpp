#include "pseudocal/scalers.hpp"

#include "pseudocal/error.hpp"

#include <cmath>
#include <sstream>

namespace pseudocal {

std::string_view to_string(CalibratorKind kind) {
  switch (kind) {
    case CalibratorKind::identity: return "identity";
    case CalibratorKind::temperature: return "temperature";
    case CalibratorKind::vector: return "vector";
    case CalibratorKind::matrix: return "matrix";
  }
  return "unknown";
}

Calibrator Calibrator::identity() { return Calibrator{}; }

Calibrator Calibrator::from_temperature(double t, std::string tag) {
  Calibrator c;
  c.kind = CalibratorKind::temperature;
  c.temperature = t;
  c.tag = std::move(tag);
  c.validate();
  return c;
}

void Calibrator::validate() const {
  switch (kind) {
    case CalibratorKind::identity:
      return;
    case CalibratorKind::temperature:
      if (!(temperature >= scalers::kMinTemperature && temperature <= scalers::kMaxTemperature)) {
        std::ostringstream msg;
        msg << "temperature " << temperature << " outside [" << scalers::kMinTemperature
            << ", " << scalers::kMaxTemperature << "]";
        throw Error(ErrorKind::invalid_input, msg.str());
      }
      return;
    case CalibratorKind::vector:
      if (scale.size() < 2 || scale.size() != bias.size() || !scale.allFinite() ||
          !bias.allFinite()) {
        throw Error(ErrorKind::invalid_input, "vector calibrator needs finite scale/bias of equal length");
      }
      return;
    case CalibratorKind::matrix:
      if (weight.rows() < 2 || weight.rows() != weight.cols() || bias.size() != weight.rows() ||
          !weight.allFinite() || !bias.allFinite()) {
        throw Error(ErrorKind::invalid_input, "matrix calibrator needs a finite C x C weight and length-C bias");
      }
      return;
  }
}

namespace scalers {

namespace {

void check_width(const Calibrator& c, Eigen::Index classes) {
  Eigen::Index expected = classes;
  if (c.kind == CalibratorKind::vector) expected = c.scale.size();
  if (c.kind == CalibratorKind::matrix) expected = c.weight.cols();
  if (expected != classes) {
    std::ostringstream msg;
    msg << "calibrator expects " << expected << " classes, batch has " << classes;
    throw Error(ErrorKind::invalid_input, msg.str());
  }
}

double hard_label_loss(const Matrix& logits, const std::vector<int>& y) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    sum += numerics::logsumexp(row) - row[y[static_cast<std::size_t>(i)]];
  }
  return sum / static_cast<double>(logits.rows());
}

// Gradient descent that halves the step whenever a move would raise the loss,
// so the returned point is never worse than the start.
template <typename LossGrad>
bool descend(Eigen::VectorXd& theta, const DescentOptions& options, LossGrad&& loss_grad) {
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd trial_grad(theta.size());
  double loss = loss_grad(theta, grad);
  double step = options.step;
  for (int it = 0; it < options.max_iterations; ++it) {
    if (grad.norm() < options.gradient_tol) return true;
    bool moved = false;
    for (int halvings = 0; halvings < 40; ++halvings) {
      Eigen::VectorXd trial = theta - step * grad;
      const double trial_loss = loss_grad(trial, trial_grad);
      if (std::isfinite(trial_loss) && trial_loss <= loss) {
        theta = std::move(trial);
        loss = trial_loss;
        grad = trial_grad;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) return grad.norm() < options.gradient_tol;
  }
  return grad.norm() < options.gradient_tol;
}

}  // namespace

Matrix apply(const Calibrator& calibrator, const Matrix& logits) {
  calibrator.validate();
  check_width(calibrator, logits.cols());
  switch (calibrator.kind) {
    case CalibratorKind::identity:
      return logits;
    case CalibratorKind::temperature:
      return logits / calibrator.temperature;
    case CalibratorKind::vector: {
      Matrix out = logits.array().rowwise() * calibrator.scale.array();
      out.rowwise() += calibrator.bias;
      return out;
    }
    case CalibratorKind::matrix: {
      Matrix out = logits * calibrator.weight.transpose();
      out.rowwise() += calibrator.bias;
      return out;
    }
  }
  return logits;
}

PredictionBatch apply(const Calibrator& calibrator, const PredictionBatch& batch) {
  batch.validate();
  PredictionBatch out = batch;
  out.logits = apply(calibrator, batch.logits);
  return out;
}

double temperature_objective(const PredictionBatch& batch, double temperature) {
  const double inv_t = 1.0 / temperature;
  double sum = 0.0;
  if (batch.soft_labels) {
    const Matrix& target = *batch.soft_labels;
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      const Row scaled = batch.logits.row(i) * inv_t;
      sum += numerics::logsumexp(scaled) - scaled.dot(target.row(i));
    }
  } else {
    const auto& y = batch.require_labels();
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      const Row scaled = batch.logits.row(i) * inv_t;
      sum += numerics::logsumexp(scaled) - scaled[y[static_cast<std::size_t>(i)]];
    }
  }
  return sum / static_cast<double>(batch.size());
}

Calibrator fit_temperature(const PredictionBatch& batch) {
  batch.validate();
  if (!batch.soft_labels) batch.require_labels();
  const double t = numerics::minimize_scalar(
      [&batch](double temp) { return temperature_objective(batch, temp); },
      kMinTemperature, kMaxTemperature, kTemperatureTol);
  return Calibrator::from_temperature(t, "temperature");
}

Calibrator fit_oracle(const PredictionBatch& batch) {
  batch.require_labels();
  PredictionBatch hard = batch;
  hard.soft_labels.reset();
  Calibrator c = fit_temperature(hard);
  c.tag = "oracle";
  return c;
}

NllDecomposition nll_decomposition(const PredictionBatch& batch, double temperature) {
  batch.validate();
  const auto& y = batch.require_labels();
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::invalid_input, "temperature must be positive");
  }
  const auto pred = batch.predictions();
  NllDecomposition out;
  double sum_all = 0.0;
  double sum_correct = 0.0;
  double sum_wrong = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Row scaled = batch.logits.row(i) / temperature;
    const double loss = numerics::logsumexp(scaled) - scaled[y[k]];
    sum_all += loss;
    if (pred[k] == y[k]) {
      sum_correct += loss;
      ++out.n_correct;
    } else {
      sum_wrong += loss;
      ++out.n_wrong;
    }
  }
  out.total = sum_all / static_cast<double>(batch.size());
  out.correct_term = out.n_correct ? sum_correct / static_cast<double>(out.n_correct) : 0.0;
  out.wrong_term = out.n_wrong ? sum_wrong / static_cast<double>(out.n_wrong) : 0.0;
  return out;
}

Calibrator fit_vector(const PredictionBatch& batch, const DescentOptions& options) {
  batch.validate();
  const auto& y = batch.require_labels();
  const Eigen::Index classes = batch.num_classes();
  const double n = static_cast<double>(batch.size());

  // Start from the fitted temperature: equal scales reproduce it exactly.
  const double t0 = fit_temperature(PredictionBatch(batch.logits, batch.labels)).temperature;
  Eigen::VectorXd theta(2 * classes);
  theta.head(classes).setConstant(1.0 / t0);
  theta.tail(classes).setZero();

  auto loss_grad = [&](const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
    const auto s = p.head(classes).transpose();
    const auto b = p.tail(classes).transpose();
    grad.setZero();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      const int label = y[static_cast<std::size_t>(i)];
      const Row z = batch.logits.row(i);
      const Row u = z.cwiseProduct(s) + b;
      const double lse = numerics::logsumexp(u);
      loss += lse - u[label];
      Row g = (u.array() - lse).exp().matrix();
      g[label] -= 1.0;
      grad.head(classes) += g.cwiseProduct(z).transpose();
      grad.tail(classes) += g.transpose();
    }
    grad /= n;
    return loss / n;
  };

  Calibrator c;
  c.kind = CalibratorKind::vector;
  c.converged = descend(theta, options, loss_grad);
  c.scale = theta.head(classes).transpose();
  c.bias = theta.tail(classes).transpose();
  c.tag = "vector";
  return c;
}

Calibrator fit_matrix(const PredictionBatch& batch, const DescentOptions& options) {
  batch.validate();
  const auto& y = batch.require_labels();
  const Eigen::Index classes = batch.num_classes();
  const double n = static_cast<double>(batch.size());

  // Start from the fitted vector scaling: a diagonal weight reproduces it.
  const Calibrator start = fit_vector(batch, options);
  Eigen::VectorXd theta(classes * classes + classes);
  Eigen::Map<Matrix> w0(theta.data(), classes, classes);
  w0.setZero();
  w0.diagonal() = start.scale.transpose();
  theta.tail(classes) = start.bias.transpose();

  auto loss_grad = [&](const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
    Eigen::Map<const Matrix> w(p.data(), classes, classes);
    const auto b = p.tail(classes).transpose();
    grad.setZero();
    Eigen::Map<Matrix> gw(grad.data(), classes, classes);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      const int label = y[static_cast<std::size_t>(i)];
      const Row z = batch.logits.row(i);
      const Row u = z * w.transpose() + b;
      const double lse = numerics::logsumexp(u);
      loss += lse - u[label];
      Row g = (u.array() - lse).exp().matrix();
      g[label] -= 1.0;
      gw += g.transpose() * z;
      grad.tail(classes) += g.transpose();
    }
    grad /= n;
    return loss / n;
  };

  Calibrator c;
  c.kind = CalibratorKind::matrix;
  c.converged = descend(theta, options, loss_grad);
  c.weight = Eigen::Map<const Matrix>(theta.data(), classes, classes);
  c.bias = theta.tail(classes).transpose();
  c.tag = "matrix";
  return c;
}

double calibrated_nll(const Calibrator& calibrator, const PredictionBatch& batch) {
  batch.validate();
  return hard_label_loss(apply(calibrator, batch.logits), batch.require_labels());
}

}  // namespace scalers
}  // namespace pseudocal
