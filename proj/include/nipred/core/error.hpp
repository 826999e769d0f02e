#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nipred {

enum class ErrorCode {
    MalformedCapture,
    IoFailure,
    EmptyResult,
    ClassTooSmall,
    CorpusEmpty,
    UnknownId,
    MixedFlows,
    ShapeMismatch,
    IdOutOfRange,
    AllMasked,
    WindowTooLong,
    InsufficientFlows,
    NothingToMask,
    SequenceTooLong,
    LabelOutOfRange,
    LengthMismatch,
    SingleClass,
    ConfigError,
    CheckpointMismatch,
    CorruptCheckpoint,
    MissingCheckpoint,
    StageFailure,
    InvalidArgument,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedCapture: return "MalformedCapture";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::EmptyResult: return "EmptyResult";
        case ErrorCode::ClassTooSmall: return "ClassTooSmall";
        case ErrorCode::CorpusEmpty: return "CorpusEmpty";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::MixedFlows: return "MixedFlows";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::IdOutOfRange: return "IdOutOfRange";
        case ErrorCode::AllMasked: return "AllMasked";
        case ErrorCode::WindowTooLong: return "WindowTooLong";
        case ErrorCode::InsufficientFlows: return "InsufficientFlows";
        case ErrorCode::NothingToMask: return "NothingToMask";
        case ErrorCode::SequenceTooLong: return "SequenceTooLong";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::SingleClass: return "SingleClass";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
        case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
        case ErrorCode::StageFailure: return "StageFailure";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace nipred
