#pragma once

#include <stdexcept>
#include <string>

namespace duq {

// Precondition/invariant breaches (caller bugs).
class ContractViolation : public std::logic_error {
  public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Bad configuration values (named field in the message).
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// File and filesystem failures.
class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed file content; carries a 1-based line number when known.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, long line = -1)
        : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    long line() const { return line_; }

  private:
    long line_;
};

// Divergence during optimization; carries the failing iteration.
class TrainingError : public std::runtime_error {
  public:
    TrainingError(const std::string& what, long iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    long iteration() const { return iteration_; }

  private:
    long iteration_;
};

}  // namespace duq
