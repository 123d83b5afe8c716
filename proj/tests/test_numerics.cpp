#include "pseudocal/error.hpp"
#include "pseudocal/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace pseudocal;
using numerics::argmax_class;
using numerics::minimize_scalar;
using numerics::softmax;

namespace {

Row row(std::initializer_list<double> v) {
  Row r(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) r[i++] = x;
  return r;
}

}  // namespace

TEST_CASE("softmax examples") {
  const Row even = softmax(row({0, 0}));
  CHECK(even[0] == doctest::Approx(0.5));
  CHECK(even[1] == doctest::Approx(0.5));

  const Row huge = softmax(row({1000, 0}));
  CHECK(huge.allFinite());
  CHECK(huge[0] == doctest::Approx(1.0));
  CHECK(huge[1] < 1e-300);

  // e^2 / (e^2 + 1)
  const Row two = softmax(row({2, 0}));
  CHECK(two[0] == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 1.0)).epsilon(1e-15));
  CHECK(two[0] == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(two[1] == doctest::Approx(0.1192).epsilon(1e-3));
}

TEST_CASE("softmax rejects bad input") {
  CHECK_THROWS_AS(softmax(row({0, std::numeric_limits<double>::quiet_NaN()})), Error);
  CHECK_THROWS_AS(softmax(row({std::numeric_limits<double>::infinity(), 0})), Error);
  CHECK_THROWS_AS(softmax(row({1.0})), Error);
}

TEST_CASE("nll examples") {
  CHECK(numerics::nll(row({1, 0}), 0) == doctest::Approx(0.0));
  CHECK(numerics::nll(row({0.5, 0.5}), 1) == doctest::Approx(std::log(2.0)));
  CHECK(numerics::nll(row({0.8808, 0.1192}), 1) == doctest::Approx(2.1269).epsilon(1e-4));
  // Clamp at 1e-12 keeps a zero probability finite.
  CHECK(numerics::nll(row({1, 0}), 1) == doctest::Approx(-std::log(1e-12)));
  // Soft target reduces to the hard case on a one-hot vector.
  CHECK(numerics::nll(row({0.25, 0.75}), row({0, 1})) == doctest::Approx(-std::log(0.75)));
  CHECK(numerics::nll(row({0.25, 0.75}), row({0.5, 0.5})) ==
        doctest::Approx(-0.5 * std::log(0.25) - 0.5 * std::log(0.75)));
}

TEST_CASE("nll and brier reject out-of-range labels") {
  try {
    numerics::nll(row({0.5, 0.5}), 2);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invalid_input);
  }
  CHECK_THROWS_AS(numerics::brier(row({0.5, 0.5}), -1), Error);
}

TEST_CASE("brier examples use the 1/C normalization") {
  CHECK(numerics::brier(row({1, 0}), 0) == doctest::Approx(0.0));
  CHECK(numerics::brier(row({0.5, 0.5}), 0) == doctest::Approx(0.25));
  CHECK(numerics::brier(row({0, 1}), 0) == doctest::Approx(1.0));
  CHECK(numerics::brier(row({0.2, 0.3, 0.5}), 2) ==
        doctest::Approx((0.04 + 0.09 + 0.25) / 3.0));
}

TEST_CASE("argmax examples and tie-break") {
  CHECK(argmax_class(row({0.1, 0.9})) == 1);
  CHECK(argmax_class(row({3, 3})) == 0);
  CHECK(argmax_class(row({1, 5, 2})) == 1);
  CHECK(argmax_class(row({2, 7, 7, 1})) == 1);
}

TEST_CASE("softmax is shift invariant and temperature keeps the argmax") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 4.0);
  std::uniform_real_distribution<double> temp(0.05, 20.0);
  for (int trial = 0; trial < 500; ++trial) {
    Row z(2 + trial % 6);
    for (auto& v : z) v = normal(rng);
    const double shift = normal(rng) * 10.0;
    const Row shifted = z.array() + shift;
    CHECK((softmax(z) - softmax(shifted)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(softmax(z).sum() - 1.0) < 1e-9);
    const double t = temp(rng);
    CHECK(argmax_class(z / t) == argmax_class(z));
    const Row p = softmax(z);
    const int y = trial % static_cast<int>(z.size());
    CHECK(numerics::nll(p, y) >= 0.0);
    CHECK(numerics::brier(p, y) >= 0.0);
  }
}

TEST_CASE("minimize_scalar finds interior and boundary optima") {
  const double quad = minimize_scalar([](double x) { return (x - 2.0) * (x - 2.0); }, 0.1, 10.0, 1e-4);
  CHECK(std::abs(quad - 2.0) <= 1e-4);

  const double edge = minimize_scalar([](double x) { return x; }, 1.0, 3.0, 1e-4);
  CHECK(edge == 1.0);

  const double upper = minimize_scalar([](double x) { return -x; }, 0.05, 20.0, 1e-4);
  CHECK(upper == 20.0);

  // Non-positive lower bound falls back to a linear grid.
  const double lin = minimize_scalar([](double x) { return std::abs(x + 0.3); }, -1.0, 1.0, 1e-6);
  CHECK(std::abs(lin + 0.3) <= 1e-6);
}

TEST_CASE("minimize_scalar matches a dense grid on random convex piecewise functions") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    // max of affine pieces is convex
    const int pieces = 2 + trial % 5;
    std::vector<std::pair<double, double>> lines;
    for (int k = 0; k < pieces; ++k) lines.emplace_back(8.0 * unit(rng) - 4.0, 10.0 * unit(rng));
    auto f = [&lines](double x) {
      double v = -INFINITY;
      for (auto [a, b] : lines) v = std::max(v, a * x + b);
      return v + 0.01 * x * x;
    };
    const double lo = 0.1, hi = 10.0;
    double grid_x = lo, grid_f = INFINITY;
    for (int k = 0; k < 100000; ++k) {
      const double x = lo + (hi - lo) * k / 99999.0;
      if (f(x) < grid_f) {
        grid_f = f(x);
        grid_x = x;
      }
    }
    const double found = minimize_scalar(f, lo, hi, 1e-4);
    CHECK(std::abs(found - grid_x) <= 1e-2);
    CHECK(std::abs(found - grid_x) <= 2e-4 + (hi - lo) / 99999.0);
  }
}

TEST_CASE("minimize_scalar reports the probe of a non-finite objective") {
  try {
    minimize_scalar([](double x) { return x > 5.0 ? std::numeric_limits<double>::quiet_NaN() : x; },
                    1.0, 10.0, 1e-4);
    FAIL("expected OptimizationError");
  } catch (const OptimizationError& e) {
    CHECK(e.kind() == ErrorKind::optimization);
    CHECK(e.probe() > 5.0);
  }
  CHECK_THROWS_AS(minimize_scalar([](double x) { return x; }, 3.0, 1.0, 1e-4), Error);
  CHECK_THROWS_AS(minimize_scalar([](double x) { return x; }, 1.0, 3.0, 0.0), Error);
}
