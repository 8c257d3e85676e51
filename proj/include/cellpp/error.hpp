#pragma once

#include <stdexcept>
#include <string>

namespace cellpp {

enum class ErrorCode {
  InvalidArgument,
  Io,
  // geometry
  InvalidWindow,
  CollinearInput,
  DegenerateDilation,
  EmptyErosion,
  // pattern
  MissingColumn,
  UnparsableRow,
  NoPointsForPatient,
  UnknownLevel,
  // intensity
  DegenerateSpread,
  EmptyPattern,
  PilotZero,
  AllZeroDenominator,
  TooFewSimulations,
  MissingType,
  NoMarkedPoints,
  // second order
  EmptyType,
  NonPositiveIntensityAtPoint,
  NegativeK,
  BandwidthTooSmall,
  EmptyQueryGrid,
  // null models
  NegativeIntensity,
  SingleType,
  EmptyAfterRestriction,
  NonPositiveParameter,
  // envelopes
  GridMismatch,
  IncompatibleNull,
  // group statistics
  NoCommonRange,
  MissingGroupLabel,
  TooFewCurves,
  // counts
  MissingTissueLabel,
  MissingRecord,
  RankDeficientDesign,
  NonConvergence,
  SingleCluster,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace cellpp
