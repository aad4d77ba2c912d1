#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvgeo {

enum class ErrorCode {
    InvalidCoordinate,
    DegenerateTarget,
    AboveHorizon,
    ParseError,
    IntegrityError,
    MissingProperty,
    FeatureDimMismatch,
    LengthMismatch,
    EmptyInput,
    IndexOutOfRange,
    InsufficientData,
    DegenerateBearings,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every recoverable failure in the library is reported through this type.
/// The code is stable and is what callers (CLI exit codes, HTTP status
/// mapping, Python exceptions) dispatch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace mvgeo
