#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cpfos {

// Bad arguments: wrong shapes, out-of-range modes, invalid configuration.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data that cannot be used: non-finite values, malformed files, CSV problems.
class InvalidData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary format violation at a known byte offset.
class FormatError : public InvalidData {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : InvalidData(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// A file that is well-formed but uses a feature this reader does not handle.
class UnsupportedFormat : public InvalidData {
 public:
  enum class Reason { Compressed, BadHeaderSize, BadMagic, Datatype, Dimensionality, Scaling };

  UnsupportedFormat(Reason reason, const std::string& what) : InvalidData(what), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularDesign : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegeneratePosterior : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace cpfos
