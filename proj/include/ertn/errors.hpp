#pragma once

#include <stdexcept>
#include <string>

namespace ertn {

/// Configuration / precondition violations (CLI exit code 2).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numeric failures: non-finite values, non-convergence (CLI exit code 3).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Resource caps, e.g. dense state vectors beyond N = 20 sites (CLI exit code 4).
struct CapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ertn
