#pragma once

#include <stdexcept>
#include <string>

namespace koopid {

// Precondition and shape violations are reported as std::invalid_argument.
// The two types below cover failures that are not caller mistakes.

/// Numerical failure: divergence, Newton non-convergence, missing crossings.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, archive or dataset file.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace koopid
