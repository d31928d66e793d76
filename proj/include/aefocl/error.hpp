#ifndef AEFOCL_ERROR_HPP_
#define AEFOCL_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aefocl {

// All engine failures derive from Error so callers can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: dimension mismatches, out-of-range labels, non-finite data.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated feature / checkpoint files.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// A factorization failed; with a positive-definite R this means corrupted state.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// API used out of order, e.g. inference before any training.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Invalid run or dataset configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace aefocl

#endif  // AEFOCL_ERROR_HPP_
