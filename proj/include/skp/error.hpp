#pragma once

#include <stdexcept>
#include <string>

namespace skp {

/// Thrown when an argument violates a documented precondition.
class invalid_input : public std::invalid_argument {
 public:
  explicit invalid_input(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown by file readers; the message carries "path:line: reason".
class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when an operation is valid but outside what this build supports
/// (e.g. dense eigensolves on instances past the size guard).
class unsupported : public std::runtime_error {
 public:
  explicit unsupported(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace skp
