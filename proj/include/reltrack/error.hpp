#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reltrack {

enum class ErrorKind {
    BadMagic,
    DimMismatch,
    NonFiniteValue,
    EmptyImage,
    ChannelMismatch,
    TooManyLevels,
    OutOfGrid,
    DegenerateBox,
    SingularInnovation,
    EmptyBatch,
    NonFiniteGradient,
    NoPositivePairs,
    EmptyGT,
    NoEligibleTracks,
    OvercrowdedSpec,
    ParseError,
    NonPositiveSize,
    InvalidConfig,
    Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Thrown by the MOT text parser; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(ErrorKind kind, std::size_t line, const std::string& message)
        : Error(kind, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace reltrack
