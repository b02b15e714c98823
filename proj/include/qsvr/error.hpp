#pragma once

#include <stdexcept>
#include <string>

namespace qsvr {

// Error categories map one-to-one onto CLI exit codes (see tools/qsvr.cpp).

/// Malformed arguments: dimension mismatches, empty inputs, bad ranges.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Data that is well-formed but statistically unusable (zero variance, constant targets).
class DegenerateData : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Problem too large for an exhaustive method.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Serialized artifact written by an incompatible format version.
class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable file content. The message names the file and byte/line offset.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t offset, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(offset) + ": " + what),
        file_(file),
        offset_(offset) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string file_;
  std::size_t offset_;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

}  // namespace detail

}  // namespace qsvr
