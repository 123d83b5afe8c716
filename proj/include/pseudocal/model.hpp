#pragma once

#include "pseudocal/numerics.hpp"

namespace pseudocal {

/// Black-box inference contract: n x d inputs in, n x C logits out.
/// Implementations must be deterministic and hold no per-call state.
class Model {
 public:
  virtual ~Model() = default;

  virtual Matrix logits(const Matrix& inputs) const = 0;
  virtual Eigen::Index num_classes() const = 0;
  virtual Eigen::Index input_dim() const = 0;
};

}  // namespace pseudocal
