#pragma once

#include <stdexcept>
#include <string>

namespace moe {

/// Bad caller input: dimension mismatch, out-of-range parameter, malformed file.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A well-formed request the library has no answer for (e.g. r̄(m) for m >= 4).
class UnsupportedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace moe
