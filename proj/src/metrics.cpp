#include "pseudocal/metrics.hpp"

#include "pseudocal/error.hpp"
#include "pseudocal/format.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pseudocal {

void PredictionBatch::validate() const {
  if (logits.rows() < 1) {
    throw Error(ErrorKind::invalid_input, "prediction batch is empty");
  }
  if (logits.cols() < 2) {
    throw Error(ErrorKind::invalid_input, "prediction batch needs at least 2 classes");
  }
  if (!logits.allFinite()) {
    throw Error(ErrorKind::invalid_input, "prediction batch contains non-finite logits");
  }
  if (labels) {
    if (static_cast<Eigen::Index>(labels->size()) != logits.rows()) {
      throw Error(ErrorKind::invalid_input, "label count differs from logit rows");
    }
    for (int y : *labels) {
      if (y < 0 || y >= logits.cols()) {
        std::ostringstream msg;
        msg << "label " << y << " out of range [0, " << logits.cols() << ")";
        throw Error(ErrorKind::invalid_input, msg.str());
      }
    }
  }
  if (soft_labels && (soft_labels->rows() != logits.rows() ||
                      soft_labels->cols() != logits.cols())) {
    throw Error(ErrorKind::invalid_input, "soft label shape differs from logits");
  }
}

const std::vector<int>& PredictionBatch::require_labels() const {
  if (!labels) throw Error(ErrorKind::labels_required, "operation requires labels");
  return *labels;
}

std::vector<int> PredictionBatch::predictions() const {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = numerics::argmax_class(logits.row(i));
  }
  return out;
}

Eigen::VectorXd PredictionBatch::confidences() const {
  Eigen::VectorXd out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out[i] = numerics::softmax(logits.row(i)).maxCoeff();
  }
  return out;
}

Matrix PredictionBatch::probabilities() const {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out.row(i) = numerics::softmax(logits.row(i));
  }
  return out;
}

double PredictionBatch::accuracy() const {
  const auto& y = require_labels();
  const auto pred = predictions();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred[i] == y[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

namespace metrics {

namespace {

double edge(int m, int num_bins) {
  return static_cast<double>(m) / static_cast<double>(num_bins);
}

void check_bins(int num_bins) {
  if (num_bins < 1) throw Error(ErrorKind::invalid_input, "bin count must be positive");
}

}  // namespace

int bin_index(double confidence, int num_bins) {
  int m = static_cast<int>(std::ceil(confidence * num_bins)) - 1;
  m = std::clamp(m, 0, num_bins - 1);
  // Settle rounding at the edges against the same edge values the bins report.
  while (m + 1 < num_bins && confidence > edge(m + 1, num_bins)) ++m;
  while (m > 0 && confidence <= edge(m, num_bins)) --m;
  return m;
}

BinStats reliability_bins(const PredictionBatch& batch, int num_bins) {
  check_bins(num_bins);
  batch.validate();
  const auto& y = batch.require_labels();
  const auto pred = batch.predictions();
  const Eigen::VectorXd conf = batch.confidences();

  BinStats stats;
  stats.total = y.size();
  stats.bins.resize(static_cast<std::size_t>(num_bins));
  std::vector<double> hits(stats.bins.size(), 0.0);
  std::vector<double> conf_sum(stats.bins.size(), 0.0);
  for (int m = 0; m < num_bins; ++m) {
    stats.bins[m].lower = edge(m, num_bins);
    stats.bins[m].upper = edge(m + 1, num_bins);
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int m = bin_index(conf[static_cast<Eigen::Index>(i)], num_bins);
    stats.bins[m].count += 1;
    hits[m] += pred[i] == y[i] ? 1.0 : 0.0;
    conf_sum[m] += conf[static_cast<Eigen::Index>(i)];
  }
  for (std::size_t m = 0; m < stats.bins.size(); ++m) {
    auto& bin = stats.bins[m];
    if (bin.count == 0) continue;
    bin.accuracy = hits[m] / static_cast<double>(bin.count);
    bin.confidence = conf_sum[m] / static_cast<double>(bin.count);
  }
  return stats;
}

double ece(const BinStats& stats) {
  double total = 0.0;
  for (const auto& bin : stats.bins) {
    if (bin.count == 0) continue;
    total += static_cast<double>(bin.count) / static_cast<double>(stats.total) *
             std::abs(bin.accuracy - bin.confidence);
  }
  return total;
}

double ece(const PredictionBatch& batch, int num_bins) {
  return ece(reliability_bins(batch, num_bins));
}

double mean_nll(const PredictionBatch& batch) {
  batch.validate();
  const auto& y = batch.require_labels();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    sum += numerics::nll(numerics::softmax(batch.logits.row(i)), y[static_cast<std::size_t>(i)]);
  }
  return sum / static_cast<double>(batch.size());
}

double mean_brier(const PredictionBatch& batch) {
  batch.validate();
  const auto& y = batch.require_labels();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    sum += numerics::brier(numerics::softmax(batch.logits.row(i)), y[static_cast<std::size_t>(i)]);
  }
  return sum / static_cast<double>(batch.size());
}

void BinStats::write_csv(std::ostream& out) const {
  out << "bin_lower,bin_upper,count,accuracy,confidence\n";
  for (const auto& bin : bins) {
    out << format_number(bin.lower) << ',' << format_number(bin.upper) << ',' << bin.count << ','
        << format_number(bin.accuracy) << ',' << format_number(bin.confidence) << '\n';
  }
}

}  // namespace metrics
}  // namespace pseudocal
