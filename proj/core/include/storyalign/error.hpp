#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace storyalign {

enum class ErrorKind {
  InvalidArgument,
  ShapeMismatch,
  DimensionMismatch,
  RowCountMismatch,
  NonFinite,
  DuplicateId,
  DegenerateInput,
  EmptyInput,
  NotFound,
  Insufficient,
  Io,
  Format,
  Provider,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace storyalign
