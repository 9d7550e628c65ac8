// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hand3d {

enum class Errc {
  InvalidArgument,
  NonPositiveDepth,
  NotARotation,
  EmptyInput,
  NonMonotonicTime,
  EmptyOmega,
  NoValidPoints,
  TokenOutOfRange,
  MalformedSequence,
  ParseError,
  SchemaError,
  MissingRaster,
  BadMagic,
  TruncatedFile,
  DimensionMismatch,
  IoError,
  ShapeMismatch,
  TauOutOfRange,
  ParseIncomplete,
  IdMismatch,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NonPositiveDepth: return "NonPositiveDepth";
    case Errc::NotARotation: return "NotARotation";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NonMonotonicTime: return "NonMonotonicTime";
    case Errc::EmptyOmega: return "EmptyOmega";
    case Errc::NoValidPoints: return "NoValidPoints";
    case Errc::TokenOutOfRange: return "TokenOutOfRange";
    case Errc::MalformedSequence: return "MalformedSequence";
    case Errc::ParseError: return "ParseError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::MissingRaster: return "MissingRaster";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::IoError: return "IoError";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::TauOutOfRange: return "TauOutOfRange";
    case Errc::ParseIncomplete: return "ParseIncomplete";
    case Errc::IdMismatch: return "IdMismatch";
  }
  return "Unknown";
}

/// Every failure in the toolkit is reported as an Error carrying a code and,
/// where known, a location (field path, clip/frame id, file name).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::string where = {})
      : std::runtime_error(message), code_(code), where_(std::move(where)) {}

  Errc code() const noexcept { return code_; }
  const std::string& where() const noexcept { return where_; }

 private:
  Errc code_;
  std::string where_;
};

// I/O-class failures map to exit code 2 in the CLI, everything else to 1.
constexpr bool is_io_error(Errc code) {
  return code == Errc::IoError || code == Errc::MissingRaster;
}

}  // namespace hand3d
