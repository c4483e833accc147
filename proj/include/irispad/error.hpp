#pragma once

#include <stdexcept>
#include <string>

namespace irispad {

enum class ErrorKind {
  invalid_input,
  parse,
  duplicate_id,
  unknown_class,
  degenerate_class,
  empty_class,
  undefined_metric,
  shape,
  index,
  configuration,
  io,
};

const char* to_string(ErrorKind kind);

// Single exception type for the toolkit; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace irispad
