#include "irispad/error.hpp"

namespace irispad {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::duplicate_id: return "duplicate id";
    case ErrorKind::unknown_class: return "unknown class";
    case ErrorKind::degenerate_class: return "degenerate class";
    case ErrorKind::empty_class: return "empty class";
    case ErrorKind::undefined_metric: return "undefined metric";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::index: return "index error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

}  // namespace irispad
