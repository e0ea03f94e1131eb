#pragma once

#include <stdexcept>
#include <string>

namespace netsync {

/// Malformed or inconsistent input: bad files, unknown ids, invalid
/// parameters, disconnected graphs where connectivity is required.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed: singular systems, non-convergence,
/// undetermined phases.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace netsync
