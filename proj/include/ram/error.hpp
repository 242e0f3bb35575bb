#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ram {

enum class ErrorCode {
  InvalidArgument,
  CellMismatch,
  AngleBinMismatch,
  ConfigMismatch,
  OutOfImage,
  MalformedXml,
  MissingField,
  AngleOutOfRange,
  EmptyTrainingSet,
  InsufficientEntries,
  EmptyDataset,
  DivergenceDetected,
  UnknownImageId,
  MalformedJsonl,
  MalformedTensor,
  Io,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::CellMismatch: return "CellMismatch";
    case ErrorCode::AngleBinMismatch: return "AngleBinMismatch";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::OutOfImage: return "OutOfImage";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::AngleOutOfRange: return "AngleOutOfRange";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::InsufficientEntries: return "InsufficientEntries";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::UnknownImageId: return "UnknownImageId";
    case ErrorCode::MalformedJsonl: return "MalformedJsonl";
    case ErrorCode::MalformedTensor: return "MalformedTensor";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` tells the failure kind apart.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ram
