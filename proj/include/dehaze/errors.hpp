#pragma once

#include <stdexcept>

namespace dhz {

// Invalid inputs are reported with std::invalid_argument and misuse of
// stateful objects (backward before forward) with std::logic_error.

/// Solver divergence, singular systems, non-finite values appearing mid-computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, truncated or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dhz
