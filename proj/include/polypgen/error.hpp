#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polypgen {

enum class ErrorCode {
    MissingMask,
    UnreadableFile,
    EmptyDataset,
    InsufficientData,
    IoFailure,
    InvalidConfig,
    ShapeMismatch,
    MissingCondition,
    InvalidDim,
    InvalidArch,
    NonFiniteLoss,
    VersionMismatch,
    CorruptCheckpoint,
    IndivisibleSize,
    EmptySet,
    TooFewSamples,
    DimensionMismatch,
    NonPSDInput,
    EmptyList,
    WrongModelKind,
    Locked,
};

std::string_view error_name(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can report it in machine-readable form.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

inline void require(bool cond, ErrorCode code, const std::string& message) {
    if (!cond) throw Error(code, message);
}

}  // namespace polypgen
