#pragma once

#include <stdexcept>
#include <string>

namespace surfcp {

/// Failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
  argument,    // bad parameter value or inconsistent options
  dimension,   // shape mismatch between grids, frames or matrices
  data,        // malformed input data or files
  io,          // filesystem failures
  singular,    // rank-deficient design / non-invertible system
  degenerate,  // no variability to work with (all-zero data, flat std)
  numerical,   // other numerical failure (non-PSD matrix, non-finite values)
};

const char* to_string(ErrorKind kind) noexcept;

/// Exception carrying the module and operation that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, std::string operation, const std::string& message)
      : std::runtime_error(message),
        kind_(kind),
        module_(std::move(module)),
        operation_(std::move(operation)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& operation() const noexcept { return operation_; }

 private:
  ErrorKind kind_;
  std::string module_;
  std::string operation_;
};

[[noreturn]] inline void fail(ErrorKind kind, const char* module, const char* operation,
                              const std::string& message) {
  throw Error(kind, module, operation, message);
}

/// "kind [module.operation]: message" for library errors, what() otherwise.
inline std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string(to_string(err->kind())) + " [" + err->module() + "." + err->operation() + "]: " + e.what();
  }
  return e.what();
}

}  // namespace surfcp
