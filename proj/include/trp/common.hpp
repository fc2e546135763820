#pragma once

#include <stdexcept>
#include <string>

namespace trp {

/// Bad arguments, malformed input data, shape mismatches. CLI exit code 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failures (non-convergence, degenerate rank). CLI exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem and serialization failures. CLI exit code 3.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace trp
