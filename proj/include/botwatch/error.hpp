#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace botwatch {

enum class ErrorCode {
  BadMagic,
  TruncatedHeader,
  UnsupportedLinkType,
  MalformedHeader,
  NonIP,
  ClockSkew,
  IOError,
  ManifestMismatch,
  EmptyTrainingSet,
  NonPositiveSigma,
  DegenerateGraph,
  ZeroVariance,
  TooFewSamples,
  RankListMismatch,
  EmptyTraining,
  SingularCovariance,
  KTooLarge,
  NonConvergence,
  DivergedLoss,
  TooFewScores,
  EmptySpace,
  LabelVocabularyMismatch,
  SingleClass,
  InvalidSpec,
  ConfigInvalid,
  InvalidArgument,
  ModelFormat,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Library-wide exception. `code()` is the stable, machine-readable part;
/// `what()` carries human context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace botwatch
