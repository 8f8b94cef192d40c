#include "ssmf/error.hpp"
#include "ssmf/log.hpp"

#include <iostream>
#include <mutex>

namespace ssmf {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Schema: return "SchemaError";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorKind::InvalidRank: return "InvalidRank";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::StepSearchExhausted: return "StepSearchExhausted";
    case ErrorKind::OutOfRangeRating: return "OutOfRangeRating";
    case ErrorKind::DegenerateLevel: return "DegenerateLevel";
    case ErrorKind::RowSumViolation: return "RowSumViolation";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::UnknownKeyword: return "UnknownKeyword";
    case ErrorKind::UnknownGroupKey: return "UnknownGroupKey";
    case ErrorKind::Numerical: return "NumericalError";
    case ErrorKind::Io: return "IoError";
    }
    return "Error";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::StepSearchExhausted:
    case ErrorKind::Numerical:
        return 3;
    default:
        return 2;
    }
}

namespace log {
namespace {

std::mutex sink_mutex;

Sink& current_sink() {
    static Sink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return sink;
}

} // namespace

Sink set_warning_sink(Sink sink) {
    std::lock_guard lock(sink_mutex);
    Sink previous = std::move(current_sink());
    current_sink() = std::move(sink);
    return previous;
}

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex);
    if (current_sink())
        current_sink()(message);
}

} // namespace log
} // namespace ssmf
