#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowguess {

enum class ErrorCode {
    CharOutOfAlphabet,
    TooLong,
    EmptyCorpus,
    EmptySplit,
    BadMaskSpec,
    BadConfig,
    CharsetMismatch,
    UnsupportedDigest,
    VersionMismatch,
    CorruptPayload,
    NonFiniteActivation,
    NonFiniteLoss,
    TapeMismatch,
    IoError,
    OracleUnavailable,
};

// Broad classes of failure; the CLI maps each one to a fixed exit status.
enum class ErrorClass { Usage, Data, Numeric, Io, Internal };

std::string_view error_name(ErrorCode code);
ErrorClass error_class(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    ErrorClass error_class() const noexcept { return flowguess::error_class(code_); }

private:
    ErrorCode code_;
};

}  // namespace flowguess
