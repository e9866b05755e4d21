#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace redeval {

enum class ErrorKind {
  Auth,
  RateLimit,
  Quota,
  Network,
  Provider,
  Parse,
  Validation,
  BudgetExhausted,
};

// Retry is only meaningful for transient transport-level failures.
constexpr bool is_retryable(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RateLimit:
    case ErrorKind::Network:
    case ErrorKind::Provider:
      return true;
    case ErrorKind::Auth:
    case ErrorKind::Quota:
    case ErrorKind::Parse:
    case ErrorKind::Validation:
    case ErrorKind::BudgetExhausted:
      return false;
  }
  return false;
}

constexpr const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Auth: return "auth";
    case ErrorKind::RateLimit: return "rate_limit";
    case ErrorKind::Quota: return "quota";
    case ErrorKind::Network: return "network";
    case ErrorKind::Provider: return "provider";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::BudgetExhausted: return "budget_exhausted";
  }
  return "unknown";
}

class FrameworkError : public std::runtime_error {
 public:
  FrameworkError(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  bool retryable() const { return is_retryable(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace redeval
