#include "mvgeo/error.hpp"

namespace mvgeo {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidCoordinate: return "InvalidCoordinate";
    case ErrorCode::DegenerateTarget: return "DegenerateTarget";
    case ErrorCode::AboveHorizon: return "AboveHorizon";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IntegrityError: return "IntegrityError";
    case ErrorCode::MissingProperty: return "MissingProperty";
    case ErrorCode::FeatureDimMismatch: return "FeatureDimMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DegenerateBearings: return "DegenerateBearings";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace mvgeo
