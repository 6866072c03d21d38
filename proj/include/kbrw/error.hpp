#pragma once

#include <stdexcept>
#include <string>

namespace kbrw {

// Every library error carries a category; the CLI maps categories to exit codes.
enum class ErrorKind {
  validation,   // bad parameters or config (exit 2)
  domain,       // argument outside a function's domain (exit 2)
  resource,     // caps, dimension limits, censoring (exit 3)
  convergence,  // solver did not converge (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::domain: return "domain";
    case ErrorKind::resource: return "resource";
    case ErrorKind::convergence: return "convergence";
  }
  return "unknown";
}

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation:
    case ErrorKind::domain: return 2;
    case ErrorKind::resource: return 3;
    case ErrorKind::convergence: return 4;
  }
  return 1;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace kbrw
