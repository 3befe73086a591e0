#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orag {

enum class ErrorCode {
  kDimensionMismatch,
  kDuplicateId,
  kUnknownId,
  kIdRetired,
  kNonFiniteInput,
  kEmptyCatalog,
  kKTooLarge,
  kPropensityMismatch,
  kZeroPropensity,
  kEmptyBatch,
  kGenerationMismatch,
  kConcurrentMutation,
  kInvalidConfig,
  kUndefinedRound,
  kEmptyEvents,
  kMissingGroundTruth,
  kNoRelevantItems,
  kWindowTooLarge,
  kInvalidArgument,
  kParseError,
  kValidationError,
  kIoError,
  kSchemaError,
  kFormatError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace orag
