#pragma once

#include <Eigen/Dense>

#include <functional>

namespace pseudocal {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Row = Eigen::RowVectorXd;
using RowRef = Eigen::Ref<const Row>;

namespace numerics {

/// Clamp applied to probabilities before taking logarithms.
inline constexpr double kProbFloor = 1e-12;

/// Throws invalid_input unless z has at least two entries, all finite.
void check_logits(RowRef z);

/// Max-subtracted softmax.
Row softmax(RowRef z);

/// log(sum(exp(z))) without overflow.
double logsumexp(RowRef z);

/// log softmax(z), exact (no clamp).
Row log_softmax(RowRef z);

/// Cross-entropy against a class index: -log max(p_y, 1e-12).
double nll(RowRef p, int label);

/// Cross-entropy against a soft target: -sum_c y_c log max(p_c, 1e-12).
double nll(RowRef p, RowRef target);

/// (1/C) sum_c (p_c - onehot(y)_c)^2.
double brier(RowRef p, int label);

/// Index of the largest entry; ties go to the lowest index.
int argmax_class(RowRef z);

/// Bounded scalar minimization: a 64-point grid scan (log-spaced when lo > 0)
/// locates the best bracket, then golden-section search narrows it to width
/// <= tol. The best point seen, including the grid, is returned, so boundary
/// optima come back exactly. Throws OptimizationError on non-finite values.
double minimize_scalar(const std::function<double(double)>& f, double lo,
                       double hi, double tol);

}  // namespace numerics
}  // namespace pseudocal
