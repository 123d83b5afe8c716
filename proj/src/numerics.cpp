#include "pseudocal/numerics.hpp"

#include "pseudocal/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace pseudocal::numerics {

void check_logits(RowRef z) {
  if (z.size() < 2) {
    throw Error(ErrorKind::invalid_input, "logit vector needs at least 2 classes");
  }
  if (!z.allFinite()) {
    throw Error(ErrorKind::invalid_input, "logit vector contains non-finite values");
  }
}

Row softmax(RowRef z) {
  check_logits(z);
  Row e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

double logsumexp(RowRef z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

Row log_softmax(RowRef z) {
  check_logits(z);
  return z.array() - logsumexp(z);
}

namespace {

void check_label(RowRef p, int label) {
  if (label < 0 || label >= p.size()) {
    std::ostringstream msg;
    msg << "class index " << label << " out of range [0, " << p.size() << ")";
    throw Error(ErrorKind::invalid_input, msg.str());
  }
}

}  // namespace

double nll(RowRef p, int label) {
  check_label(p, label);
  return -std::log(std::max(p[label], kProbFloor));
}

double nll(RowRef p, RowRef target) {
  if (p.size() != target.size()) {
    throw Error(ErrorKind::invalid_input, "soft target length differs from probability vector");
  }
  double loss = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c) {
    if (target[c] != 0.0) loss -= target[c] * std::log(std::max(p[c], kProbFloor));
  }
  return loss;
}

double brier(RowRef p, int label) {
  check_label(p, label);
  double sum = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c) {
    const double diff = p[c] - (c == label ? 1.0 : 0.0);
    sum += diff * diff;
  }
  return sum / static_cast<double>(p.size());
}

int argmax_class(RowRef z) {
  check_logits(z);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < z.size(); ++c) {
    if (z[c] > z[best]) best = c;
  }
  return static_cast<int>(best);
}

double minimize_scalar(const std::function<double(double)>& f, double lo,
                       double hi, double tol) {
  if (!(lo < hi) || !(tol > 0.0) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorKind::invalid_input, "minimize_scalar needs lo < hi and tol > 0");
  }
  auto eval = [&f](double x) {
    const double v = f(x);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "objective is non-finite at x = " << x;
      throw OptimizationError(x, msg.str());
    }
    return v;
  };

  constexpr int kGrid = 64;
  std::array<double, kGrid> xs{};
  const bool log_spaced = lo > 0.0;
  for (int k = 0; k < kGrid; ++k) {
    const double t = static_cast<double>(k) / (kGrid - 1);
    xs[k] = log_spaced ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo);
  }
  xs.front() = lo;
  xs.back() = hi;

  double best_x = xs[0];
  double best_f = eval(xs[0]);
  int best_k = 0;
  for (int k = 1; k < kGrid; ++k) {
    const double v = eval(xs[k]);
    if (v < best_f) {
      best_f = v;
      best_x = xs[k];
      best_k = k;
    }
  }

  double a = xs[std::max(best_k - 1, 0)];
  double b = xs[std::min(best_k + 1, kGrid - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
    }
  }

  const double mid = 0.5 * (a + b);
  const double f_mid = eval(mid);
  // Strict comparison keeps an exact grid hit (e.g. a boundary optimum).
  if (f_mid < best_f) {
    best_f = f_mid;
    best_x = mid;
  }
  return best_x;
}

}  // namespace pseudocal::numerics
