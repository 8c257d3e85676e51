#include "cellpp/error.hpp"

namespace cellpp {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::CollinearInput: return "CollinearInput";
    case ErrorCode::DegenerateDilation: return "DegenerateDilation";
    case ErrorCode::EmptyErosion: return "EmptyErosion";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnparsableRow: return "UnparsableRow";
    case ErrorCode::NoPointsForPatient: return "NoPointsForPatient";
    case ErrorCode::UnknownLevel: return "UnknownLevel";
    case ErrorCode::DegenerateSpread: return "DegenerateSpread";
    case ErrorCode::EmptyPattern: return "EmptyPattern";
    case ErrorCode::PilotZero: return "PilotZero";
    case ErrorCode::AllZeroDenominator: return "AllZeroDenominator";
    case ErrorCode::TooFewSimulations: return "TooFewSimulations";
    case ErrorCode::MissingType: return "MissingType";
    case ErrorCode::NoMarkedPoints: return "NoMarkedPoints";
    case ErrorCode::EmptyType: return "EmptyType";
    case ErrorCode::NonPositiveIntensityAtPoint: return "NonPositiveIntensityAtPoint";
    case ErrorCode::NegativeK: return "NegativeK";
    case ErrorCode::BandwidthTooSmall: return "BandwidthTooSmall";
    case ErrorCode::EmptyQueryGrid: return "EmptyQueryGrid";
    case ErrorCode::NegativeIntensity: return "NegativeIntensity";
    case ErrorCode::SingleType: return "SingleType";
    case ErrorCode::EmptyAfterRestriction: return "EmptyAfterRestriction";
    case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::IncompatibleNull: return "IncompatibleNull";
    case ErrorCode::NoCommonRange: return "NoCommonRange";
    case ErrorCode::MissingGroupLabel: return "MissingGroupLabel";
    case ErrorCode::TooFewCurves: return "TooFewCurves";
    case ErrorCode::MissingTissueLabel: return "MissingTissueLabel";
    case ErrorCode::MissingRecord: return "MissingRecord";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::SingleCluster: return "SingleCluster";
  }
  return "Unknown";
}

}  // namespace cellpp
