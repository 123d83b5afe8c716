#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pseudocal {

enum class ErrorKind {
  invalid_input,
  labels_required,
  optimization,
  degenerate_target,
  empty_filter,
  data_access,
  invalid_spec,
  training,
  io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind so the
/// CLI can print a single parseable line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the scalar minimizer when the objective is non-finite at a probe.
class OptimizationError : public Error {
 public:
  OptimizationError(double probe, const std::string& message)
      : Error(ErrorKind::optimization, message), probe_(probe) {}

  double probe() const noexcept { return probe_; }

 private:
  double probe_;
};

/// All pseudo labels collapsed onto one class, so no distinct-label pair exists.
class DegenerateTargetError : public Error {
 public:
  DegenerateTargetError(int predicted_class, const std::string& message)
      : Error(ErrorKind::degenerate_target, message),
        predicted_class_(predicted_class) {}

  /// -1 when the surviving pseudo labels were not all identical.
  int predicted_class() const noexcept { return predicted_class_; }

 private:
  int predicted_class_;
};

/// Training loss became non-finite.
class TrainingError : public Error {
 public:
  TrainingError(int epoch, const std::string& message)
      : Error(ErrorKind::training, message), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace pseudocal
