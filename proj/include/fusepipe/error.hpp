#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fusepipe {

enum class ErrorCode {
    EmptyMask,
    MalformedHeader,
    RaggedRow,
    NonFiniteValue,
    DuplicateSampleId,
    TooFewSamples,
    RankDeficient,
    TooFewMinority,
    ShapeMismatch,
    SingleClass,
    DegenerateWeights,
    NoConvergence,
    UnknownKind,
    ParamOutOfRange,
    EmptyList,
    UnsatisfiableFolds,
    IncompleteReport,
    RowMisalignment,
    LengthMismatch,
    Empty,
    LabelOutOfRange,
    MissingArtifact,
    ConfigInvalid,
    DimensionMismatch,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::TooFewMinority: return "TooFewMinority";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::UnsatisfiableFolds: return "UnsatisfiableFolds";
    case ErrorCode::IncompleteReport: return "IncompleteReport";
    case ErrorCode::RowMisalignment: return "RowMisalignment";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the cause, not the message text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

} // namespace fusepipe
