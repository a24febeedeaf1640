#include "polypgen/error.hpp"

namespace polypgen {

std::string_view error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingMask: return "MissingMask";
        case ErrorCode::UnreadableFile: return "UnreadableFile";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::MissingCondition: return "MissingCondition";
        case ErrorCode::InvalidDim: return "InvalidDim";
        case ErrorCode::InvalidArch: return "InvalidArch";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorCode::IndivisibleSize: return "IndivisibleSize";
        case ErrorCode::EmptySet: return "EmptySet";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonPSDInput: return "NonPSDInput";
        case ErrorCode::EmptyList: return "EmptyList";
        case ErrorCode::WrongModelKind: return "WrongModelKind";
        case ErrorCode::Locked: return "Locked";
    }
    return "Unknown";
}

}  // namespace polypgen
