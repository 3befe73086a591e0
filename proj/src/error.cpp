#include "orag/error.hpp"

namespace orag {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kIdRetired: return "IdRetired";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kEmptyCatalog: return "EmptyCatalog";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kPropensityMismatch: return "PropensityMismatch";
    case ErrorCode::kZeroPropensity: return "ZeroPropensity";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kGenerationMismatch: return "GenerationMismatch";
    case ErrorCode::kConcurrentMutation: return "ConcurrentMutation";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kUndefinedRound: return "UndefinedRound";
    case ErrorCode::kEmptyEvents: return "EmptyEvents";
    case ErrorCode::kMissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::kNoRelevantItems: return "NoRelevantItems";
    case ErrorCode::kWindowTooLarge: return "WindowTooLarge";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kFormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace orag
