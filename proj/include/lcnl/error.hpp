#pragma once

#include <stdexcept>
#include <string>

namespace lcnl {

enum class ErrorKind {
  dimension_mismatch,
  missing_covariate,
  unknown_alternative,
  unknown_variable,
  invalid_tree,
  invalid_parameters,
  non_finite,
  singular_matrix,
  out_of_range,
  parse_error,
  io_error,
  config_error,
  empty_data,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::missing_covariate: return "missing covariate";
    case ErrorKind::unknown_alternative: return "unknown alternative";
    case ErrorKind::unknown_variable: return "unknown variable";
    case ErrorKind::invalid_tree: return "invalid tree";
    case ErrorKind::invalid_parameters: return "invalid parameters";
    case ErrorKind::non_finite: return "non-finite value";
    case ErrorKind::singular_matrix: return "singular matrix";
    case ErrorKind::out_of_range: return "out of range";
    case ErrorKind::parse_error: return "parse error";
    case ErrorKind::io_error: return "i/o error";
    case ErrorKind::config_error: return "config error";
    case ErrorKind::empty_data: return "no observations";
  }
  return "error";
}

/// Every failure raised by the library. `subject` names the offending
/// entity (a variable, an individual id, a column, a coordinate, ...).
class ModelError : public std::runtime_error {
 public:
  ModelError(ErrorKind kind, std::string subject, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + " [" + subject + "]: " + detail),
        kind_(kind),
        subject_(std::move(subject)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorKind kind_;
  std::string subject_;
};

}  // namespace lcnl
