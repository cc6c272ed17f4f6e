#pragma once

#include <stdexcept>
#include <string>

namespace capypipe {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Record or configuration violates a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file contents (manifest line, WAV chunk, PPM header...).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace capypipe
