#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lidarlift {

/// Every failure raised by the library carries one of these kinds so callers
/// (and the CLI exit-code mapping) can dispatch without parsing messages.
enum class ErrorKind {
  Io,
  Length,
  UnknownClass,
  Parse,
  BadMagic,
  UnsupportedVersion,
  SizeMismatch,
  DimMismatch,
  EmptyInput,
  BadK,
  EmptyHistogram,
  EmptyMatrix,
  EvalCommandFailed,
  LengthMismatch,
  DegenerateSpec,
  Config,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lidarlift
