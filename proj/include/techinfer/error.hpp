#ifndef TECHINFER_ERROR_HPP
#define TECHINFER_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace techinfer {

enum class ErrorCode {
    MalformedRecord,
    InvalidTechniqueId,
    EmptyInput,
    InfeasibleSplit,
    SingularSystem,
    DimensionMismatch,
    NoValidTriples,
    NoEvaluableEntities,
    EmptyObservation,
    EmptyPredictions,
    PerplexityInfeasible,
    NonFiniteInput,
    InvalidArgument,
    ModelFormat,
    Io,
};

/// Stable kebab-case name, used in CLI diagnostics and HTTP error bodies.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by the ingestion parsers; carries the 1-based source line.
class RecordError : public Error {
public:
    RecordError(ErrorCode code, std::size_t line, const std::string& message)
        : Error(code, "line " + std::to_string(line) + ": " + message), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace techinfer

#endif
