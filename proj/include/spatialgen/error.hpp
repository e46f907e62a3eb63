#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spatialgen {

enum class ErrorCode {
  // geometry / graph
  DuplicateLocation,
  BadK,
  NonFinite,
  ZeroVector,
  MissingEdge,
  BadLocationId,
  // autodiff
  ShapeMismatch,
  NonFiniteResult,
  DisconnectedLoss,
  // task models and metrics
  LengthMismatch,
  DegenerateLabels,
  // training
  EmptyDomain,
  TooFewLocations,
  NonFiniteLoss,
  BadFraction,
  BadConfig,
  // data ingestion
  MissingColumn,
  UnparsableNumber,
  EmptyFile,
  NonBinaryLabel,
  BadCount,
  Io,
  BadCheckpoint,
};

/// Stable snake_case identifier, used in CLI diagnostics.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spatialgen
