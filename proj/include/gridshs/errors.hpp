#pragma once

#include <stdexcept>
#include <string>

namespace gridshs {

// Bad input from the operator: unknown names, malformed config, missing files.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// The model itself is inconsistent (unobservable design, non-convergent power flow, ...).
class ModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A numerical precondition failed (non-finite entries, spectral radius >= 1, ...).
class NumericalError : public ModelError {
  public:
    using ModelError::ModelError;
};

}  // namespace gridshs
