#pragma once

#include <stdexcept>
#include <string>

namespace delayflock {

// Malformed or inconsistent user input (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The hypotheses required by a closed-form result are not met.
class HypothesisError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Two independent evaluation routes of the same quantity disagree.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite state encountered while integrating (CLI exit code 3).
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace delayflock
