#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssmf {

enum class ErrorKind {
    Schema,
    Config,
    EmptyVocabulary,
    InvalidRank,
    ShapeMismatch,
    StepSearchExhausted,
    OutOfRangeRating,
    DegenerateLevel,
    RowSumViolation,
    LengthMismatch,
    UnknownKeyword,
    UnknownGroupKey,
    Numerical,
    Io,
};

std::string_view to_string(ErrorKind kind);

// Process exit code for an error of this kind: 2 for input/config problems,
// 3 for numerical failures.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace ssmf
