#pragma once

#include <stdexcept>
#include <string>

namespace mqs {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCategory {
  internal = 1,
  usage = 2,
  io = 3,
  config = 4,
  numeric = 5,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
    case ErrorCategory::numeric: return "numeric";
    default: return "internal";
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }
  int exit_code() const { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

// Programming-contract violations (shape mismatches, bad call order).
struct StructuralError : Error {
  explicit StructuralError(const std::string& what) : Error(ErrorCategory::internal, what) {}
};

#define MQS_CHECK(cond, exc_type, msg)        \
  do {                                        \
    if (!(cond)) throw exc_type(msg);         \
  } while (0)

}  // namespace mqs
