#include "storyalign/error.hpp"

namespace storyalign {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::ShapeMismatch: return "shape_mismatch";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::RowCountMismatch: return "row_count_mismatch";
    case ErrorKind::NonFinite: return "non_finite";
    case ErrorKind::DuplicateId: return "duplicate_id";
    case ErrorKind::DegenerateInput: return "degenerate_input";
    case ErrorKind::EmptyInput: return "empty_input";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Insufficient: return "insufficient";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Provider: return "provider";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace storyalign
