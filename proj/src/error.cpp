#include "scate/error.hpp"

namespace scate {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyAfterCleaning: return "EmptyAfterCleaning";
    case ErrorCode::NonBinaryLabels: return "NonBinaryLabels";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidRatios: return "InvalidRatios";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::DimensionTooSmall: return "DimensionTooSmall";
    case ErrorCode::ColumnMismatch: return "ColumnMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::EmptyLabelFold: return "EmptyLabelFold";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyTraining: return "EmptyTraining";
    case ErrorCode::BadLearningRate: return "BadLearningRate";
    case ErrorCode::ModelDataMismatch: return "ModelDataMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::TooFewPositive: return "TooFewPositive";
    case ErrorCode::RequiresFullSpectrum: return "RequiresFullSpectrum";
    case ErrorCode::BadDims: return "BadDims";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::CrcMismatch: return "CrcMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace scate
