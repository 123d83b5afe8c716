#include "pseudocal/error.hpp"

namespace pseudocal {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::labels_required: return "labels_required";
    case ErrorKind::optimization: return "optimization";
    case ErrorKind::degenerate_target: return "degenerate_target";
    case ErrorKind::empty_filter: return "empty_filter";
    case ErrorKind::data_access: return "data_access";
    case ErrorKind::invalid_spec: return "invalid_spec";
    case ErrorKind::training: return "training";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace pseudocal
