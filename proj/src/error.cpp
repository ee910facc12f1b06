#include "lidarlift/error.hpp"

namespace lidarlift {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Length: return "LengthError";
    case ErrorKind::UnknownClass: return "UnknownClassError";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::BadK: return "BadK";
    case ErrorKind::EmptyHistogram: return "EmptyHistogram";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::EvalCommandFailed: return "EvalCommandFailed";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DegenerateSpec: return "DegenerateSpec";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Error";
}

}  // namespace lidarlift
