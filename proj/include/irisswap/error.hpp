#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace irisswap {

enum class ErrorCode {
  MalformedHeader,
  UnsupportedMaxval,
  TruncatedPayload,
  IoFailure,
  OutOfBounds,
  DegenerateFrame,
  NoPupilFound,
  NoLimbusFound,
  DimensionMismatch,
  InvalidGeometry,
  DegenerateTexture,
  MalformedFile,
  TextureTooSmall,
  GeometryMismatch,
  InsufficientMask,
  TooFewPoints,
  DegenerateDesign,
  NoValidationSamples,
  GazeOutOfFrame,
  TooFewSamples,
  NonMonotonicTime,
  AllSamplesCapped,
  SignalTooShort,
  NonFiniteInput,
  SingleClassPartition,
  DivergedLoss,
  NoWindows,
  NoSpoofedSamples,
  TooFewSubjects,
  UnknownSubcommand,
  ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedMaxval: return "UnsupportedMaxval";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::DegenerateFrame: return "DegenerateFrame";
    case ErrorCode::NoPupilFound: return "NoPupilFound";
    case ErrorCode::NoLimbusFound: return "NoLimbusFound";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::DegenerateTexture: return "DegenerateTexture";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::TextureTooSmall: return "TextureTooSmall";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::InsufficientMask: return "InsufficientMask";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::NoValidationSamples: return "NoValidationSamples";
    case ErrorCode::GazeOutOfFrame: return "GazeOutOfFrame";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::AllSamplesCapped: return "AllSamplesCapped";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::SingleClassPartition: return "SingleClassPartition";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::NoWindows: return "NoWindows";
    case ErrorCode::NoSpoofedSamples: return "NoSpoofedSamples";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this type; `code()` is
/// what callers (and the CLI's machine-readable stderr) switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace irisswap
