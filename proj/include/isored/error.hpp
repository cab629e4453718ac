#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace isored {

/// Machine-readable failure categories. Every library error carries one.
enum class ErrorCode {
    InvalidArgument,
    MixedFrequency,
    NonlinearUnknowns,
    HarmonicCapExceeded,
    UnstableEigenvalue,
    ResonantDenominator,
    MissingUnknown,
    ConjugateSymmetryViolation,
    StepTooLarge,
    NonFiniteState,
    SchemaVersionMismatch,
    InvariantViolation,
    NotSettled,
    SamplingTooCoarse,
    MissingHarmonic,
    MissingLowerStage,
    IllConditioned,
    RankDeficient,
    InconsistentProbeGrids,
    TooFewSamples,
    DegenerateCovariance,
    UnstableEstimate,
    InsufficientRank,
    NoConvergence,
    NotConverged,
    LimitUnstable,
    ResonantCombination,
    MissingDerivativeTensor,
    CflViolation,
    BasisDimensionMismatch,
    DimensionMismatch,
    IoError,
    ConfigError,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Throws Error(code, message) when `condition` is false.
inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) {
        throw Error(code, message);
    }
}

}  // namespace isored
