#include "keyshap/error.hpp"

namespace keyshap {

std::string_view error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSchemaValidation: return "schema-validation";
    case ErrorKind::kZeroDegree: return "zero-degree";
    case ErrorKind::kSchemaMismatch: return "schema-mismatch";
    case ErrorKind::kOracleIo: return "oracle-io";
    case ErrorKind::kMissingCoalition: return "missing-coalition";
    case ErrorKind::kMalformedInput: return "malformed-input";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kOutOfBounds: return "out-of-bounds";
    case ErrorKind::kDegenerateRow: return "degenerate-row";
    case ErrorKind::kDimensionMismatch: return "dimension-mismatch";
    case ErrorKind::kOutOfRange: return "out-of-range";
    case ErrorKind::kTooManyPlayers: return "too-many-players";
    case ErrorKind::kDegenerateAttribution: return "degenerate-attribution";
    case ErrorKind::kIncompleteInput: return "incomplete-input";
    case ErrorKind::kBadKeypointArray: return "bad-keypoint-array";
    case ErrorKind::kDanglingImageId: return "dangling-image-id";
    case ErrorKind::kInsufficientPairs: return "insufficient-pairs";
    case ErrorKind::kNonFinite: return "non-finite";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

bool is_oracle_error(ErrorKind kind) {
  return kind == ErrorKind::kOracleIo || kind == ErrorKind::kMissingCoalition ||
         kind == ErrorKind::kSchemaMismatch;
}

Error::Error(ErrorKind kind, const std::string& message, std::string payload)
    : std::runtime_error(std::string(error_name(kind)) + ": " + message),
      kind_(kind),
      payload_(std::move(payload)) {}

}  // namespace keyshap
