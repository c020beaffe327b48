#pragma once

#include <stdexcept>
#include <string>

namespace speconet {

// Bad configuration or input files. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corrupted or inconsistent persisted data. CLI exit code 3.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Blow-up, divergence, failed factorization. CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Poisson right-hand side with a nonzero mean under the zero-mean gauge.
class CompatibilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Caller broke a documented precondition (shape mismatch and similar).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace speconet
