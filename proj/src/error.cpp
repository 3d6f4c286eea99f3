#include "botwatch/error.hpp"

namespace botwatch {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedHeader: return "TruncatedHeader";
    case ErrorCode::UnsupportedLinkType: return "UnsupportedLinkType";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::NonIP: return "NonIP";
    case ErrorCode::ClockSkew: return "ClockSkew";
    case ErrorCode::IOError: return "IOError";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::DegenerateGraph: return "DegenerateGraph";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::RankListMismatch: return "RankListMismatch";
    case ErrorCode::EmptyTraining: return "EmptyTraining";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::TooFewScores: return "TooFewScores";
    case ErrorCode::EmptySpace: return "EmptySpace";
    case ErrorCode::LabelVocabularyMismatch: return "LabelVocabularyMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ModelFormat: return "ModelFormat";
  }
  return "Unknown";
}

}  // namespace botwatch
