#include "isored/error.hpp"

namespace isored {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::MixedFrequency: return "MixedFrequency";
        case ErrorCode::NonlinearUnknowns: return "NonlinearUnknowns";
        case ErrorCode::HarmonicCapExceeded: return "HarmonicCapExceeded";
        case ErrorCode::UnstableEigenvalue: return "UnstableEigenvalue";
        case ErrorCode::ResonantDenominator: return "ResonantDenominator";
        case ErrorCode::MissingUnknown: return "MissingUnknown";
        case ErrorCode::ConjugateSymmetryViolation: return "ConjugateSymmetryViolation";
        case ErrorCode::StepTooLarge: return "StepTooLarge";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::NotSettled: return "NotSettled";
        case ErrorCode::SamplingTooCoarse: return "SamplingTooCoarse";
        case ErrorCode::MissingHarmonic: return "MissingHarmonic";
        case ErrorCode::MissingLowerStage: return "MissingLowerStage";
        case ErrorCode::IllConditioned: return "IllConditioned";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::InconsistentProbeGrids: return "InconsistentProbeGrids";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
        case ErrorCode::UnstableEstimate: return "UnstableEstimate";
        case ErrorCode::InsufficientRank: return "InsufficientRank";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::LimitUnstable: return "LimitUnstable";
        case ErrorCode::ResonantCombination: return "ResonantCombination";
        case ErrorCode::MissingDerivativeTensor: return "MissingDerivativeTensor";
        case ErrorCode::CflViolation: return "CflViolation";
        case ErrorCode::BasisDimensionMismatch: return "BasisDimensionMismatch";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace isored
