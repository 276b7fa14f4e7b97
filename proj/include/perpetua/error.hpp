#pragma once

#include <stdexcept>
#include <string>

namespace perpetua {

// Bad input: malformed spec, schedule, config or flag. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A computation that cannot produce a valid result or certificate
// (non-contraction, overflow, mass escaping the support). CLI exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// The lattice is too coarse for any density window; the Kolmogorov
// certificate is still valid.
class CoarseLatticeError : public NumericError {
 public:
  explicit CoarseLatticeError(const std::string& what) : NumericError(what) {}
};

}  // namespace perpetua
