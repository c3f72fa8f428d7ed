#pragma once

#include <stdexcept>
#include <string>

namespace fidelity {

/// Input failed a schema, count, or range check.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A translation backend failed after exhausting its retries.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// A write collided with an existing immutable record.
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fidelity
