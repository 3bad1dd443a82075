#ifndef PTTRUST_ERRORS_HPP_
#define PTTRUST_ERRORS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pttrust {

// Each error family maps onto one CLI exit code (see exit_code_for).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while reading or writing an activation store. Carries the byte
/// offset of the offending record when one is known.
class StoreError : public DataError {
 public:
  StoreError(const std::string& what, std::uint64_t offset = kNoOffset)
      : DataError(what), offset_(offset) {}

  static constexpr std::uint64_t kNoOffset = ~std::uint64_t{0};

  std::uint64_t offset() const noexcept { return offset_; }
  bool has_offset() const noexcept { return offset_ != kNoOffset; }

 private:
  std::uint64_t offset_;
};

/// Raised by evaluation and ranking helpers when an item must be left out of
/// an aggregate (e.g. a snippet without any buggy line).
class ExcludedError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace pttrust

#endif  // PTTRUST_ERRORS_HPP_
