#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scate {

enum class ErrorCode {
  MissingColumn,
  EmptyAfterCleaning,
  NonBinaryLabels,
  ParseError,
  InvalidRatios,
  TooFewRows,
  DimensionTooSmall,
  ColumnMismatch,
  TooFewSamples,
  EmptyLabelFold,
  DimensionMismatch,
  EmptyTraining,
  BadLearningRate,
  ModelDataMismatch,
  NotSymmetric,
  ConvergenceFailure,
  RankTooLarge,
  TooFewPositive,
  RequiresFullSpectrum,
  BadDims,
  ShapeMismatch,
  BadMagic,
  UnsupportedVersion,
  CrcMismatch,
  Truncated,
  Io,
  Config,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library is reported as an Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace scate
