#include "flowguess/errors.hpp"

namespace flowguess {

std::string_view error_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::CharOutOfAlphabet: return "char_out_of_alphabet";
    case ErrorCode::TooLong: return "too_long";
    case ErrorCode::EmptyCorpus: return "empty_corpus";
    case ErrorCode::EmptySplit: return "empty_split";
    case ErrorCode::BadMaskSpec: return "bad_mask_spec";
    case ErrorCode::BadConfig: return "bad_config";
    case ErrorCode::CharsetMismatch: return "charset_mismatch";
    case ErrorCode::UnsupportedDigest: return "unsupported_digest";
    case ErrorCode::VersionMismatch: return "version_mismatch";
    case ErrorCode::CorruptPayload: return "corrupt_payload";
    case ErrorCode::NonFiniteActivation: return "non_finite_activation";
    case ErrorCode::NonFiniteLoss: return "non_finite_loss";
    case ErrorCode::TapeMismatch: return "tape_mismatch";
    case ErrorCode::IoError: return "io_error";
    case ErrorCode::OracleUnavailable: return "oracle_unavailable";
    }
    return "unknown";
}

ErrorClass error_class(ErrorCode code) {
    switch (code) {
    case ErrorCode::BadMaskSpec:
    case ErrorCode::BadConfig:
        return ErrorClass::Usage;
    case ErrorCode::CharOutOfAlphabet:
    case ErrorCode::TooLong:
    case ErrorCode::EmptyCorpus:
    case ErrorCode::EmptySplit:
    case ErrorCode::CharsetMismatch:
    case ErrorCode::UnsupportedDigest:
    case ErrorCode::VersionMismatch:
    case ErrorCode::CorruptPayload:
        return ErrorClass::Data;
    case ErrorCode::NonFiniteActivation:
    case ErrorCode::NonFiniteLoss:
        return ErrorClass::Numeric;
    case ErrorCode::IoError:
    case ErrorCode::OracleUnavailable:
        return ErrorClass::Io;
    case ErrorCode::TapeMismatch:
        return ErrorClass::Internal;
    }
    return ErrorClass::Internal;
}

}  // namespace flowguess
