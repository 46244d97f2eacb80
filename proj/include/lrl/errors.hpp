#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lrl {

/// Operand shapes do not fit the operation.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A caller-supplied argument is out of range (counts, labels, enum names).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition on the inputs was violated.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

/// A ball query found no points within the radius.
struct EmptyRegionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed dataset or config text. `line` is 1-based, 0 when unknown.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line_no)
      : std::runtime_error(what), line(line_no) {}
  std::size_t line;
};

/// Checkpoint file unreadable or inconsistent with the model.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lrl
