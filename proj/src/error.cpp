#include "spatialgen/error.hpp"

namespace spatialgen {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DuplicateLocation: return "duplicate_location";
    case ErrorCode::BadK: return "bad_k";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::ZeroVector: return "zero_vector";
    case ErrorCode::MissingEdge: return "missing_edge";
    case ErrorCode::BadLocationId: return "bad_location_id";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::NonFiniteResult: return "non_finite_result";
    case ErrorCode::DisconnectedLoss: return "disconnected_loss";
    case ErrorCode::LengthMismatch: return "length_mismatch";
    case ErrorCode::DegenerateLabels: return "degenerate_labels";
    case ErrorCode::EmptyDomain: return "empty_domain";
    case ErrorCode::TooFewLocations: return "too_few_locations";
    case ErrorCode::NonFiniteLoss: return "non_finite_loss";
    case ErrorCode::BadFraction: return "bad_fraction";
    case ErrorCode::BadConfig: return "bad_config";
    case ErrorCode::MissingColumn: return "missing_column";
    case ErrorCode::UnparsableNumber: return "unparsable_number";
    case ErrorCode::EmptyFile: return "empty_file";
    case ErrorCode::NonBinaryLabel: return "non_binary_label";
    case ErrorCode::BadCount: return "bad_count";
    case ErrorCode::Io: return "io_error";
    case ErrorCode::BadCheckpoint: return "bad_checkpoint";
  }
  return "unknown";
}

}  // namespace spatialgen
