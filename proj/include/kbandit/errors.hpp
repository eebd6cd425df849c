#pragma once

#include <stdexcept>
#include <string>

namespace kbandit {

// Invalid instance description (bad kernel parameters, non-PSD gram, ...).
class ConfigError : public std::invalid_argument {
public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Operation requested in a representation that cannot support it,
// e.g. a kernel-only bilinear form at gamma == 0.
class UnsupportedModeError : public std::logic_error {
public:
  explicit UnsupportedModeError(const std::string& what) : std::logic_error(what) {}
};

// Robust estimators below their sample-count gate.
class InsufficientSamplesError : public std::invalid_argument {
public:
  explicit InsufficientSamplesError(const std::string& what) : std::invalid_argument(what) {}
};

// Factorization or eigensolver failure.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kbandit
