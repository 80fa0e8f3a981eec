#pragma once

#include <stdexcept>
#include <string>

namespace setret {

// Machine-parseable failure codes. Every error raised by the library carries
// exactly one of these; the CLI prints them as `error[<code>]: <message>`.
enum class ErrorCode {
  ZeroVector,
  NonFinite,
  DimMismatch,
  AlphaOutOfRange,
  EmptyCaptionSet,
  EmptyTargetSet,
  NonPositiveTau,
  NonPositiveEpsilon,
  MissingDelta,
  EmptyDatabase,
  UnknownSubsetId,
  MissingTruth,
  KExceedsPool,
  EmptyRanking,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  DimZero,
  RowOutOfRange,
  DuplicateCandidateId,
  DimMismatchAcrossBanks,
  ParseError,
  DegenerateParams,
  TooLargeForExactOT,
  InvalidArgument,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace setret
