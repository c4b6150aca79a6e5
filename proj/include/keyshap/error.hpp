#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace keyshap {

enum class ErrorKind {
  kSchemaValidation,
  kZeroDegree,
  kSchemaMismatch,
  kOracleIo,
  kMissingCoalition,
  kMalformedInput,
  kConfig,
  kOutOfBounds,
  kDegenerateRow,
  kDimensionMismatch,
  kOutOfRange,
  kTooManyPlayers,
  kDegenerateAttribution,
  kIncompleteInput,
  kBadKeypointArray,
  kDanglingImageId,
  kInsufficientPairs,
  kNonFinite,
  kIo,
};

// Stable kebab-case name, used in CLI diagnostics and the Python layer.
std::string_view error_name(ErrorKind kind);

// Oracle-side failures map to exit code 4, everything else is a data error.
bool is_oracle_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string payload = {});

  ErrorKind kind() const noexcept { return kind_; }
  // Raw data attached to the failure, e.g. the offending oracle response line.
  const std::string& payload() const noexcept { return payload_; }

 private:
  ErrorKind kind_;
  std::string payload_;
};

}  // namespace keyshap
