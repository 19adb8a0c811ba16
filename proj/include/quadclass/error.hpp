#pragma once

#include <stdexcept>
#include <string>

namespace quadclass {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data that parses but is internally inconsistent (corrupt CSV rows,
// checksum mismatches, genus violations surfaced as hard failures).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed input: unparsable rows, unknown feature names, bad index specs.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace quadclass
